"""Differentiable Gaussian splatting on the CPU.

Visible Gaussians are sorted once per view by depth. The image is processed in
row bands: each band enumerates the (pixel, Gaussian) fragments that touch it,
orders them pixel-major with depth order inside a pixel and composites

    rgb = Σ c_i α'_i T_i + bg · T_final,   T_i = Π_{j<i} (1 − α'_j),
    α'_i = min(0.99, α_i · exp(−½ dᵀ Σ₂⁻¹ d)),

stopping a pixel once its transmittance falls below 1e-4. The backward pass
re-enumerates each band, so memory is bounded by one band of fragments.
Per-primitive sums are reduced in fragment order within a band and in band
order across bands, which makes gradients bit-reproducible whatever the
worker count.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from core.camera import Camera
from core.errors import DimensionError
from core.gaussians import DIAGNOSTICS, GaussianCloud, rotation_jacobian
from core.image import ImageBuffer
from splat.gradients import GradientBundle
from splat.projection import Projection, project

logger = logging.getLogger(__name__)

MAX_ALPHA = 0.99
MIN_TRANSMITTANCE = 1e-4
WHITE = (1.0, 1.0, 1.0)


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("GSLIFT_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class RasterSettings:
    extent_sigma: float = 3.0    # rasterized footprint radius in units of σ_max
    band_rows: int = 32
    threads: Optional[int] = None  # None -> GSLIFT_THREADS

    def workers(self) -> int:
        return self.threads if self.threads else worker_count()


FULL_EXTENT = RasterSettings(extent_sigma=np.inf)


@dataclass
class RenderedView:
    rgb: ImageBuffer
    alpha: ImageBuffer
    depth: ImageBuffer
    diagnostics: Dict[str, int] = field(default_factory=dict)


@dataclass
class _Fragments:
    lp: np.ndarray        # pixel index local to the band
    g: np.ndarray         # primitive index
    dx: np.ndarray
    dy: np.ndarray
    G: np.ndarray
    alpha: np.ndarray
    clamped: np.ndarray
    T: np.ndarray
    active: np.ndarray
    log1m: np.ndarray
    starts: np.ndarray    # first fragment of each pixel segment
    seg: np.ndarray       # segment id of each fragment


def _band_fragments(proj: Projection, order: np.ndarray, width: int, y0: int, y1: int,
                    extent_sigma: float) -> Optional[_Fragments]:
    if order.size == 0:
        return None
    m = proj.means2d[order]
    r = extent_sigma * proj.sigma_max[order]
    # pixel centres j + 0.5 inside [mean − r, mean + r]
    x_lo = np.maximum(np.ceil(m[:, 0] - r - 0.5), 0.0)
    x_hi = np.minimum(np.floor(m[:, 0] + r - 0.5), width - 1.0)
    y_lo = np.maximum(np.ceil(m[:, 1] - r - 0.5), float(y0))
    y_hi = np.minimum(np.floor(m[:, 1] + r - 0.5), y1 - 1.0)
    nx = np.maximum(x_hi - x_lo + 1.0, 0.0).astype(np.int64)
    ny = np.maximum(y_hi - y_lo + 1.0, 0.0).astype(np.int64)
    counts = nx * ny
    keep = counts > 0
    if not np.any(keep):
        return None
    counts, nx = counts[keep], nx[keep]
    x_lo, y_lo = x_lo[keep].astype(np.int64), y_lo[keep].astype(np.int64)
    total = int(counts.sum())

    g = np.repeat(order[keep], counts)
    first = np.cumsum(counts) - counts
    local = np.arange(total, dtype=np.int64) - np.repeat(first, counts)
    nx_rep = np.repeat(nx, counts)
    px = np.repeat(x_lo, counts) + local % nx_rep
    py = np.repeat(y_lo, counts) + local // nx_rep
    lp = (py - y0) * width + px

    perm = np.argsort(lp, kind="stable")
    lp, g, px, py = lp[perm], g[perm], px[perm], py[perm]

    dx = px + 0.5 - proj.means2d[g, 0]
    dy = py + 0.5 - proj.means2d[g, 1]
    a, b, c = proj.conics[g, 0], proj.conics[g, 1], proj.conics[g, 2]
    G = np.exp(-0.5 * (a * dx * dx + 2.0 * b * dx * dy + c * dy * dy))
    raw = proj.opacities[g] * G
    clamped = raw > MAX_ALPHA
    alpha = np.where(clamped, MAX_ALPHA, raw)
    log1m = np.log1p(-alpha)

    new = np.empty(total, dtype=bool)
    new[0] = True
    new[1:] = lp[1:] != lp[:-1]
    starts = np.flatnonzero(new)
    seg = np.cumsum(new) - 1
    exclusive = np.cumsum(log1m) - log1m
    T = np.exp(exclusive - exclusive[starts][seg])
    active = T >= MIN_TRANSMITTANCE
    return _Fragments(lp, g, dx, dy, G, alpha, clamped, T, active, log1m, starts, seg)


def _bands(height: int, rows: int) -> List[tuple]:
    rows = max(1, rows)
    return [(y0, min(height, y0 + rows)) for y0 in range(0, height, rows)]


def _map_bands(fn, bands: Sequence[tuple], workers: int) -> list:
    if workers <= 1 or len(bands) <= 1:
        return [fn(band) for band in bands]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, bands))


def _diagnostics(proj: Projection) -> Dict[str, int]:
    return {
        "culled_near": proj.culled_near,
        "culled_offscreen": proj.culled_offscreen,
        "singular": proj.singular,
        "zero_quaternions": DIAGNOSTICS["zero_quaternions"],
    }


def render(cloud: GaussianCloud, camera: Camera, background=WHITE,
           settings: RasterSettings = RasterSettings()) -> RenderedView:
    width, height = camera.image_width, camera.image_height
    bg = np.asarray(background, dtype=np.float64).reshape(3)
    proj = project(cloud, camera)
    order = proj.depth_order()

    def band(rows):
        y0, y1 = rows
        npix = (y1 - y0) * width
        frags = _band_fragments(proj, order, width, y0, y1, settings.extent_sigma)
        if frags is None:
            return np.tile(bg, (npix, 1)), np.zeros(npix), np.zeros(npix)
        w = frags.alpha * frags.T * frags.active
        rgb = np.stack([np.bincount(frags.lp, w * proj.colors[frags.g, ch], minlength=npix)
                        for ch in range(3)], axis=1)
        depth = np.bincount(frags.lp, w * proj.depths[frags.g], minlength=npix)
        Tf = np.exp(np.bincount(frags.lp, frags.log1m * frags.active, minlength=npix))
        acc = 1.0 - Tf
        depth = np.where(acc > 0, depth / np.where(acc > 0, acc, 1.0), 0.0)
        return rgb + Tf[:, None] * bg, acc, depth

    parts = _map_bands(band, _bands(height, settings.band_rows), settings.workers())
    rgb = np.concatenate([p[0] for p in parts]).reshape(height, width, 3)
    alpha = np.concatenate([p[1] for p in parts]).reshape(height, width, 1)
    depth = np.concatenate([p[2] for p in parts]).reshape(height, width, 1)
    return RenderedView(ImageBuffer(rgb), ImageBuffer(np.clip(alpha, 0.0, 1.0)), ImageBuffer(depth),
                        _diagnostics(proj))


def render_backward(cloud: GaussianCloud, camera: Camera, dL_drgb: ImageBuffer,
                    dL_dalpha: Optional[ImageBuffer] = None, background=WHITE,
                    settings: RasterSettings = RasterSettings()) -> GradientBundle:
    """Reverse-mode gradients of a scalar loss through render()."""
    width, height = camera.image_width, camera.image_height
    if dL_drgb.shape != (height, width, 3):
        raise DimensionError(f"dL/drgb has shape {dL_drgb.shape}, camera expects {(height, width, 3)}")
    if dL_dalpha is None:
        dL_dalpha = ImageBuffer(np.zeros((height, width, 1)))
    if dL_dalpha.shape != (height, width, 1):
        raise DimensionError(f"dL/dalpha has shape {dL_dalpha.shape}, camera expects {(height, width, 1)}")

    n = len(cloud)
    bg = np.asarray(background, dtype=np.float64).reshape(3)
    proj = project(cloud, camera)
    order = proj.depth_order()
    g_rgb = dL_drgb.data.reshape(-1, 3)
    g_alpha = dL_dalpha.data.reshape(-1)

    def band(rows):
        y0, y1 = rows
        npix = (y1 - y0) * width
        frags = _band_fragments(proj, order, width, y0, y1, settings.extent_sigma)
        if frags is None:
            return None
        gC = g_rgb[y0 * width:y1 * width][frags.lp]
        gA = g_alpha[y0 * width:y1 * width][frags.lp]
        Tf = np.exp(np.bincount(frags.lp, frags.log1m * frags.active, minlength=npix))[frags.lp]
        col = proj.colors[frags.g]
        weight = frags.alpha * frags.T * frags.active

        # colour emitted by the fragments behind each fragment in its pixel
        emitted = col * weight[:, None]
        inclusive = np.cumsum(emitted, axis=0)
        inclusive -= (inclusive[frags.starts] - emitted[frags.starts])[frags.seg]
        behind = np.add.reduceat(emitted, frags.starts, axis=0)[frags.seg] - inclusive

        inv = 1.0 / (1.0 - frags.alpha)
        d_alpha = np.sum(gC * (col * frags.T[:, None] - (behind + Tf[:, None] * bg) * inv[:, None]), axis=1)
        d_alpha = (d_alpha + gA * Tf * inv) * frags.active
        d_raw = np.where(frags.clamped, 0.0, d_alpha)
        opac = proj.opacities[frags.g]
        d_power = d_raw * opac * frags.G
        a, b, c = proj.conics[frags.g, 0], proj.conics[frags.g, 1], proj.conics[frags.g, 2]
        dx, dy = frags.dx, frags.dy

        def total(weights):
            return np.bincount(frags.g, weights, minlength=n)

        return np.stack([
            total(gC[:, 0] * weight), total(gC[:, 1] * weight), total(gC[:, 2] * weight),
            total(d_raw * frags.G),
            total(-0.5 * dx * dx * d_power), total(-dx * dy * d_power), total(-0.5 * dy * dy * d_power),
            total((a * dx + b * dy) * d_power), total((b * dx + c * dy) * d_power),
        ], axis=1)

    sums = np.zeros((n, 9))
    for part in _map_bands(band, _bands(height, settings.band_rows), settings.workers()):
        if part is not None:
            sums += part
    return _chain_to_parameters(cloud, camera, proj, sums)


def _chain_to_parameters(cloud: GaussianCloud, camera: Camera, proj: Projection, sums: np.ndarray) -> GradientBundle:
    n = len(cloud)
    if n == 0:
        return GradientBundle.zeros(0)
    d_color = sums[:, 0:3] * ((cloud.colors >= 0.0) & (cloud.colors <= 1.0))
    d_opacity = sums[:, 3]
    ga, gb, gc = sums[:, 4], sums[:, 5], sums[:, 6]
    d_mx, d_my = sums[:, 7], sums[:, 8]

    # conic = Σ₂⁻¹  ->  dL/dΣ₂ = −Q (dL/dQ) Q
    Q = np.empty((n, 2, 2))
    Q[:, 0, 0], Q[:, 0, 1], Q[:, 1, 0], Q[:, 1, 1] = proj.conics[:, 0], proj.conics[:, 1], proj.conics[:, 1], proj.conics[:, 2]
    GQ = np.empty((n, 2, 2))
    GQ[:, 0, 0], GQ[:, 0, 1], GQ[:, 1, 0], GQ[:, 1, 1] = ga, 0.5 * gb, 0.5 * gb, gc
    G2 = -Q @ GQ @ Q

    # Σ₂ = M Σ₃ Mᵀ + εI with M = J W
    Wr = proj.rot_world
    M = proj.jacobians @ Wr
    Mt = np.transpose(M, (0, 2, 1))
    G3 = Mt @ G2 @ M
    dM = 2.0 * G2 @ M @ proj.cov3d
    dJ = dM @ Wr.T

    fx = fy = camera.focal
    t = proj.cam_points
    z = np.where(proj.visible, t[:, 2], 1.0)
    tx, ty = t[:, 0], t[:, 1]
    z2, z3 = z * z, z * z * z
    d_tx = dJ[:, 0, 2] * (-fx / z2) + d_mx * fx / z
    d_ty = dJ[:, 1, 2] * (-fy / z2) + d_my * fy / z
    d_tz = (dJ[:, 0, 0] * (-fx / z2) + dJ[:, 0, 2] * (2.0 * fx * tx / z3)
            + dJ[:, 1, 1] * (-fy / z2) + dJ[:, 1, 2] * (2.0 * fy * ty / z3)
            - d_mx * fx * tx / z2 - d_my * fy * ty / z2)
    d_center = np.stack([d_tx, d_ty, d_tz], axis=1) @ Wr

    # Σ₃ = (R S)(R S)ᵀ
    s = proj.scales
    M3 = proj.rotations * s[:, None, :]
    dM3 = 2.0 * G3 @ M3
    d_scale = np.sum(proj.rotations * dM3, axis=1)
    d_R = dM3 * s[:, None, :]
    d_qhat = np.einsum("nkij,nij->nk", rotation_jacobian(proj.unit_quats), d_R)
    qn = np.linalg.norm(cloud.rotations, axis=1, keepdims=True)
    qhat = proj.unit_quats
    d_q = (d_qhat - qhat * np.sum(qhat * d_qhat, axis=1, keepdims=True)) / np.where(qn > 1e-12, qn, np.inf)

    o = proj.opacities
    mean2d_norm = np.hypot(d_mx * camera.image_width / 2.0, d_my * camera.image_height / 2.0)
    mask = proj.visible
    return GradientBundle(
        center=np.where(mask[:, None], d_center, 0.0),
        log_scale=np.where(mask[:, None], d_scale * s, 0.0),
        rotation=np.where(mask[:, None], d_q, 0.0),
        opacity_logit=np.where(mask, d_opacity * o * (1.0 - o), 0.0),
        color=np.where(mask[:, None], d_color, 0.0),
        mean2d_norm=np.where(mask, mean2d_norm, 0.0),
        seen=mask.copy(),
    )
