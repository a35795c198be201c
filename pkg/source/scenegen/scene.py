"""Procedural strand-like hair scenes over a template head.

A strand is a polyline of `gaussians_per_strand` segments rooted on the
upper hemisphere of the head sphere; each segment becomes one Gaussian
elongated along the tangent. The template body (head sphere plus a neck and
torso capsule) is appended in gray. The neck sits at the world origin, y up,
and the face looks towards +z.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from core.camera import Camera
from core.errors import ConfigError
from core.gaussians import GaussianCloud, logit

logger = logging.getLogger(__name__)

STYLES = ("straight", "wavy", "bun", "braid")
HAIR_OPACITY = 0.9
BODY_OPACITY = 0.95
BODY_GRAY = 0.6
SKIN_THICKNESS = 0.002
LEAD_FRACTION = 0.3          # share of a bun/braid strand running from the scalp to the feature
DRAPE_MARGIN = 1.03          # strands are kept this far outside the head sphere


@dataclass(frozen=True)
class SceneSpec:
    seed: int = 0
    style: str = "straight"
    strand_count: int = 120
    gaussians_per_strand: int = 24
    head_center: Tuple[float, float, float] = (0.0, 0.12, 0.0)
    head_radius: float = 0.1
    strand_length: float = 0.26
    strand_radius: float = 0.004
    base_color: Tuple[float, float, float] = (0.36, 0.22, 0.12)
    color_variation: float = 0.08
    strand_jitter: float = 0.004
    wave_amplitude: float = 0.015
    wave_frequency: float = 3.0
    braid_turns: float = 3.0
    braid_radius: float = 0.018
    head_gaussians: int = 160
    capsule_rings: int = 10
    capsule_segments: int = 12

    def __post_init__(self):
        if self.style not in STYLES:
            raise ConfigError(f"unknown hair style {self.style!r}; expected one of {', '.join(STYLES)}")
        if self.strand_count < 1 or self.gaussians_per_strand < 1:
            raise ConfigError("strand_count and gaussians_per_strand must be >= 1")
        if self.head_radius <= 0:
            raise ConfigError("head_radius must be positive")
        object.__setattr__(self, "head_center", tuple(float(v) for v in self.head_center))
        object.__setattr__(self, "base_color", tuple(float(v) for v in self.base_color))

    @property
    def center(self) -> np.ndarray:
        return np.array(self.head_center)


# --------------------- Strand centerlines --------------------- #

def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def sample_roots(spec: SceneSpec, rng: np.random.Generator) -> np.ndarray:
    """Root points on the upper head hemisphere, away from the face."""
    roots = []
    while len(roots) < spec.strand_count:
        d = rng.standard_normal(3)
        d /= np.linalg.norm(d)
        if d[1] < 0.0:
            d[1] = -d[1]
        if d[2] > 0.55 and d[1] < 0.6:
            continue
        roots.append(spec.center + spec.head_radius * d)
    return np.array(roots)


def _drape(points: np.ndarray, spec: SceneSpec) -> np.ndarray:
    offset = points - spec.center
    dist = np.linalg.norm(offset, axis=1, keepdims=True)
    floor = DRAPE_MARGIN * spec.head_radius
    return np.where(dist < floor, spec.center + offset / np.maximum(dist, 1e-12) * floor, points)


def _draped_path(root: np.ndarray, spec: SceneSpec, n: int, length: float) -> np.ndarray:
    """Gravity-draped arc: leaves the scalp along the normal and bends downwards."""
    normal = _unit(root - spec.center)
    s = (np.arange(n) + 0.5) / n
    bend = np.sqrt(s)[:, None]
    steps = _unit((1.0 - bend) * normal + bend * np.array([0.0, -1.0, 0.0]))
    points = np.vstack([root, root + np.cumsum(steps * (length / n), axis=0)])
    points[1:] = _drape(points[1:], spec)
    return points


def _lead_in(root: np.ndarray, target: np.ndarray, spec: SceneSpec, n: int) -> np.ndarray:
    s = np.linspace(0.0, 1.0, n + 1)[:, None]
    points = (1.0 - s) * root + s * target
    points[1:] = _drape(points[1:], spec)
    return points


def braid_frame(spec: SceneSpec):
    """(origin, axis, e1, e2) of the braid: hangs behind the head, tilted back."""
    origin = spec.center + spec.head_radius * np.array([0.0, -0.25, -1.3])
    axis = _unit(np.array([0.0, -1.0, -0.25]))
    e1 = np.array([1.0, 0.0, 0.0])
    e2 = np.cross(axis, e1)
    return origin, axis, e1, e2


def braid_point(spec: SceneSpec, helix: int, s: np.ndarray, radius: float = None) -> np.ndarray:
    """Point at fraction `s` along helix 0, 1 or 2; phases differ by 2π/3."""
    origin, axis, e1, e2 = braid_frame(spec)
    radius = spec.braid_radius if radius is None else radius
    length = spec.strand_length * (1.0 - LEAD_FRACTION)
    theta = 2.0 * math.pi * spec.braid_turns * np.asarray(s) + 2.0 * math.pi * helix / 3.0
    s = np.asarray(s)[..., None]
    return origin + s * length * axis + radius * (np.cos(theta)[..., None] * e1 + np.sin(theta)[..., None] * e2)


def _bun_path(root: np.ndarray, k: int, spec: SceneSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Lead-in to the bun, then a spiral over a torus patch at the crown's back."""
    n_lead = max(1, int(round(n * LEAD_FRACTION)))
    n_bun = n - n_lead
    bun_center = spec.center + 1.1 * spec.head_radius * _unit(np.array([0.0, 0.55, -0.85]))
    out = _unit(bun_center - spec.center)
    e1 = _unit(np.cross(out, np.array([1.0, 0.0, 0.0])))
    e2 = np.cross(out, e1)
    major, minor = 0.45 * spec.head_radius, 0.2 * spec.head_radius
    u0 = 2.0 * math.pi * k / spec.strand_count
    v0 = rng.uniform(0.0, 2.0 * math.pi)
    s = np.linspace(0.0, 1.0, n_bun + 1)
    u = u0 + 1.5 * math.pi * s
    v = v0 + 4.0 * math.pi * s
    ring = (major + minor * np.cos(v))[:, None]
    spiral = bun_center + ring * (np.cos(u)[:, None] * e1 + np.sin(u)[:, None] * e2) + (minor * np.sin(v))[:, None] * out
    lead = _lead_in(root, spiral[0], spec, n_lead)
    return np.vstack([lead, spiral[1:]])


def _braid_path(root: np.ndarray, k: int, spec: SceneSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    n_lead = max(1, int(round(n * LEAD_FRACTION)))
    n_helix = n - n_lead
    helix = k % 3
    radius = spec.braid_radius + rng.uniform(-1.0, 1.0) * spec.strand_jitter
    s = np.linspace(0.0, 1.0, n_helix + 1)
    coil = braid_point(spec, helix, s, radius)
    lead = _lead_in(root, coil[0], spec, n_lead)
    return np.vstack([lead, coil[1:]])


def strand_polylines(spec: SceneSpec) -> List[np.ndarray]:
    """One (gaussians_per_strand + 1, 3) polyline per strand."""
    rng = np.random.default_rng([spec.seed, 1])
    roots = sample_roots(spec, rng)
    n = spec.gaussians_per_strand
    strands = []
    for k, root in enumerate(roots):
        length = spec.strand_length * (1.0 + 0.1 * rng.uniform(-1.0, 1.0))
        if spec.style == "bun" and n >= 2:
            points = _bun_path(root, k, spec, n, rng)
        elif spec.style == "braid" and n >= 2:
            points = _braid_path(root, k, spec, n, rng)
        else:
            points = _draped_path(root, spec, n, length)
            if spec.style == "wavy":
                tangent = _unit(np.gradient(points, axis=0))
                side = _unit(np.cross(tangent, _unit(root - spec.center)) + 1e-9)
                s = np.linspace(0.0, 1.0, n + 1)
                phase = rng.uniform(0.0, 2.0 * math.pi)
                wave = spec.wave_amplitude * s * np.sin(2.0 * math.pi * spec.wave_frequency * s + phase)
                points = points + wave[:, None] * side
            if spec.strand_jitter > 0:
                drift = rng.normal(0.0, spec.strand_jitter, size=3) * np.linspace(0.0, 1.0, n + 1)[:, None]
                points = points + drift
        strands.append(points)
    return strands


# --------------------- Gaussians from geometry --------------------- #

def _frames_to_quaternions(frames: np.ndarray) -> np.ndarray:
    """Rotation matrices (columns = local axes) to (w, x, y, z) quaternions."""
    xyzw = Rotation.from_matrix(frames).as_quat()
    return np.concatenate([xyzw[:, 3:], xyzw[:, :3]], axis=1)


def _orthonormal_frames(primary: np.ndarray) -> np.ndarray:
    """Right-handed frames whose first column is `primary`."""
    helper = np.where(np.abs(primary[:, 1:2]) < 0.9, np.array([[0.0, 1.0, 0.0]]), np.array([[1.0, 0.0, 0.0]]))
    second = _unit(np.cross(primary, helper))
    third = np.cross(primary, second)
    return np.stack([primary, second, third], axis=2)


def segments_to_cloud(polylines: List[np.ndarray], radius: float, colors: np.ndarray, opacity: float) -> GaussianCloud:
    """One Gaussian per segment: σ_major = segment length / 2, σ_minor = radius."""
    if not polylines:
        return GaussianCloud()
    starts = np.concatenate([p[:-1] for p in polylines])
    ends = np.concatenate([p[1:] for p in polylines])
    diff = ends - starts
    seg_len = np.maximum(np.linalg.norm(diff, axis=1), 1e-6)
    tangent = diff / seg_len[:, None]
    scales = np.stack([seg_len / 2.0, np.full_like(seg_len, radius), np.full_like(seg_len, radius)], axis=1)
    return GaussianCloud(
        centers=0.5 * (starts + ends),
        log_scales=np.log(scales),
        rotations=_frames_to_quaternions(_orthonormal_frames(tangent)),
        opacity_logits=np.full(len(starts), float(logit(opacity))),
        colors=colors,
    )


def generate_hair(spec: SceneSpec) -> GaussianCloud:
    strands = strand_polylines(spec)
    rng = np.random.default_rng([spec.seed, 2])
    n = spec.gaussians_per_strand
    base = np.array(spec.base_color)
    shading = 0.85 + 0.3 * (np.arange(n) + 0.5) / n
    colors = []
    for _ in strands:
        tint = base + rng.uniform(-spec.color_variation, spec.color_variation, size=3)
        colors.append(np.clip(tint[None, :] * shading[:, None], 0.0, 1.0))
    cloud = segments_to_cloud(strands, spec.strand_radius, np.concatenate(colors), HAIR_OPACITY)
    logger.debug("generated %s hair: %d strands, %d gaussians", spec.style, len(strands), len(cloud))
    return cloud


def _fibonacci_sphere(n: int) -> np.ndarray:
    i = np.arange(n) + 0.5
    y = 1.0 - 2.0 * i / n
    r = np.sqrt(1.0 - y * y)
    phi = math.pi * (3.0 - math.sqrt(5.0)) * i
    return np.stack([r * np.cos(phi), y, r * np.sin(phi)], axis=1)


def _surface_discs(points: np.ndarray, normals: np.ndarray, spacing: float) -> GaussianCloud:
    frames = _orthonormal_frames(normals)
    # put the thin axis on the normal: columns (t1, t2, n)
    frames = frames[:, :, [1, 2, 0]]
    n = len(points)
    scales = np.tile([spacing / 2.0, spacing / 2.0, SKIN_THICKNESS], (n, 1))
    return GaussianCloud(
        centers=points,
        log_scales=np.log(scales),
        rotations=_frames_to_quaternions(frames),
        opacity_logits=np.full(n, float(logit(BODY_OPACITY))),
        colors=np.full((n, 3), BODY_GRAY),
    )


def generate_body(spec: SceneSpec) -> GaussianCloud:
    """Gray template: head sphere plus a vertical neck/torso capsule through the origin."""
    dirs = _fibonacci_sphere(spec.head_gaussians)
    head_spacing = spec.head_radius * math.sqrt(4.0 * math.pi / spec.head_gaussians)
    head = _surface_discs(spec.center + spec.head_radius * dirs, dirs, head_spacing)

    neck_radius = 0.45 * spec.head_radius
    y_top = spec.head_center[1] - 0.5 * spec.head_radius
    y_bottom = -2.5 * spec.head_radius
    rings = np.linspace(y_bottom, y_top, spec.capsule_rings)
    angles = 2.0 * math.pi * np.arange(spec.capsule_segments) / spec.capsule_segments
    yy, aa = np.meshgrid(rings, angles, indexing="ij")
    normals = np.stack([np.sin(aa).ravel(), np.zeros(aa.size), np.cos(aa).ravel()], axis=1)
    points = normals * neck_radius + np.stack([np.zeros(aa.size), yy.ravel(), np.zeros(aa.size)], axis=1)
    spacing = max(2.0 * math.pi * neck_radius / spec.capsule_segments, (y_top - y_bottom) / max(1, spec.capsule_rings - 1))
    capsule = _surface_discs(points, normals, spacing)
    return GaussianCloud.concatenate([head, capsule])


def generate_scene(spec: SceneSpec) -> GaussianCloud:
    """Hair primitives first, body primitives after them."""
    return GaussianCloud.concatenate([generate_hair(spec), generate_body(spec)])


# --------------------- Landmarks --------------------- #

def _face_template() -> np.ndarray:
    """68 points of a frontal face layout in [-1, 1]², v up."""
    jaw_t = np.linspace(-0.45 * math.pi, 0.45 * math.pi, 17)
    jaw = np.stack([0.8 * np.sin(jaw_t), -0.1 - 0.7 * np.cos(jaw_t)], axis=1)
    brow_x = np.linspace(0.15, 0.65, 5)
    brow_y = 0.5 + 0.06 * np.sin(np.linspace(0.0, math.pi, 5))
    brows = np.concatenate([np.stack([-brow_x[::-1], brow_y], axis=1), np.stack([brow_x, brow_y[::-1]], axis=1)])
    bridge = np.stack([np.zeros(4), np.linspace(0.32, -0.02, 4)], axis=1)
    nostrils = np.stack([np.linspace(-0.15, 0.15, 5), np.full(5, -0.12)], axis=1)
    eye_t = 2.0 * math.pi * np.arange(6) / 6
    eye = np.stack([0.12 * np.cos(eye_t), 0.05 * np.sin(eye_t)], axis=1)
    eyes = np.concatenate([eye + [-0.35, 0.27], eye + [0.35, 0.27]])
    outer_t = 2.0 * math.pi * np.arange(12) / 12
    inner_t = 2.0 * math.pi * np.arange(8) / 8
    mouth = np.concatenate([
        np.stack([0.3 * np.cos(outer_t), -0.45 + 0.12 * np.sin(outer_t)], axis=1),
        np.stack([0.18 * np.cos(inner_t), -0.45 + 0.05 * np.sin(inner_t)], axis=1),
    ])
    return np.concatenate([jaw, brows, bridge, nostrils, eyes, mouth])


def face_landmarks_3d(spec: SceneSpec) -> np.ndarray:
    uv = _face_template() * 0.55
    dirs = _unit(np.concatenate([uv, np.ones((len(uv), 1))], axis=1))
    return spec.center + spec.head_radius * dirs


def face_landmarks(spec: SceneSpec, camera: Camera) -> np.ndarray:
    """(68, 2) pixel positions of the template face seen from `camera`."""
    return camera.project_points(face_landmarks_3d(spec))
