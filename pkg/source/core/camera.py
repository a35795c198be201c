"""Pinhole cameras, relative poses and the camera text format.

Conventions: world is y-up; the camera frame is x right, y down, z forward;
pixel (row i, col j) is centred at (j + 0.5, i + 0.5) and the principal point
sits at (W/2, H/2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np

from core.errors import DatasetError, InvalidPoseError

SENSOR_WIDTH_MM = 36.0
WORLD_UP = np.array([0.0, 1.0, 0.0])


def focal_from_mm(focal_mm: float, image_width: int, sensor_mm: float = SENSOR_WIDTH_MM) -> float:
    """Pixel focal for a full-frame-equivalent focal length."""
    return focal_mm / sensor_mm * image_width


def _normalize(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def look_at_rotation(position: np.ndarray, target: np.ndarray, up: np.ndarray) -> np.ndarray:
    """World-to-camera rotation with rows (right, down, forward)."""
    forward = _normalize(np.asarray(target, float) - np.asarray(position, float))
    right = np.cross(forward, up)
    if np.linalg.norm(right) < 1e-9:
        # looking straight along `up`
        right = np.cross(forward, np.array([0.0, 0.0, -1.0]))
    right = _normalize(right)
    down = np.cross(forward, right)
    return np.stack([right, down, forward])


@dataclass(frozen=True)
class RelativePose:
    """Pose change (R, T) from a reference view: x_b = R x_a + T in camera coordinates."""

    R: np.ndarray
    T: np.ndarray

    @classmethod
    def identity(cls) -> "RelativePose":
        return cls(np.eye(3), np.zeros(3))

    def is_identity(self, tol: float = 1e-9) -> bool:
        return bool(np.allclose(self.R, np.eye(3), atol=tol) and np.allclose(self.T, 0.0, atol=tol))


@dataclass(frozen=True)
class Camera:
    image_width: int
    image_height: int
    focal: float
    position: Tuple[float, float, float]
    look_at: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    up: Tuple[float, float, float] = (0.0, 1.0, 0.0)
    azimuth: float = 0.0
    elevation: float = 0.0
    radius: float = 1.0

    def __post_init__(self):
        if self.radius <= 0:
            raise InvalidPoseError(f"camera radius must be positive, got {self.radius}")
        if self.focal <= 0 or self.image_width <= 0 or self.image_height <= 0:
            raise InvalidPoseError("camera intrinsics must be positive")
        for name in ("position", "look_at", "up"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))

    @classmethod
    def orbit(cls, azimuth: float, elevation: float, radius: float, width: int, height: int,
              focal: float, center=(0.0, 0.0, 0.0)) -> "Camera":
        """Camera on a sphere around `center`; azimuth 0, elevation 0 looks along -z."""
        center = np.asarray(center, dtype=np.float64)
        direction = np.array([
            math.cos(elevation) * math.sin(azimuth),
            math.sin(elevation),
            math.cos(elevation) * math.cos(azimuth),
        ])
        return cls(
            image_width=width, image_height=height, focal=focal,
            position=tuple(center + radius * direction), look_at=tuple(center),
            up=tuple(WORLD_UP), azimuth=azimuth, elevation=elevation, radius=radius,
        )

    @property
    def principal_point(self) -> Tuple[float, float]:
        return self.image_width / 2.0, self.image_height / 2.0

    def rotation(self) -> np.ndarray:
        return look_at_rotation(np.array(self.position), np.array(self.look_at), np.array(self.up))

    def extrinsics(self) -> Tuple[np.ndarray, np.ndarray]:
        """(R, t) mapping world points to camera coordinates: x_c = R x_w + t."""
        R = self.rotation()
        return R, -R @ np.array(self.position)

    def view_matrix(self) -> np.ndarray:
        R, t = self.extrinsics()
        V = np.eye(4)
        V[:3, :3] = R
        V[:3, 3] = t
        return V

    def project_points(self, points: np.ndarray) -> np.ndarray:
        R, t = self.extrinsics()
        p = np.atleast_2d(points) @ R.T + t
        cx, cy = self.principal_point
        return np.stack([self.focal * p[:, 0] / p[:, 2] + cx, self.focal * p[:, 1] / p[:, 2] + cy], axis=1)

    def relative_to(self, reference: "Camera") -> RelativePose:
        Ra, ta = reference.extrinsics()
        Rb, tb = self.extrinsics()
        R = Rb @ Ra.T
        return RelativePose(R, tb - R @ ta)

    def compose(self, pose: RelativePose) -> "Camera":
        """The camera reached from this (reference) camera by a relative pose."""
        R = np.asarray(pose.R, dtype=np.float64)
        T = np.asarray(pose.T, dtype=np.float64).reshape(3)
        if R.shape != (3, 3) or not np.all(np.isfinite(R)) or not np.all(np.isfinite(T)):
            raise InvalidPoseError("relative pose must be a finite 3x3 rotation and 3-vector")
        if not np.allclose(R.T @ R, np.eye(3), atol=1e-6) or np.linalg.det(R) < 0:
            raise InvalidPoseError("relative rotation is not a proper rotation")
        if pose.is_identity(0.0):
            return self
        Ra, ta = self.extrinsics()
        Rb = R @ Ra
        tb = R @ ta + T
        position = -Rb.T @ tb
        look_at = position + Rb[2] * self.radius
        return self._with_pose(position, look_at, -Rb[1])

    def rotated_about_target(self, rotvec: np.ndarray) -> "Camera":
        """Orbit the camera about its look-at point by a rotation vector."""
        from scipy.spatial.transform import Rotation

        Rj = Rotation.from_rotvec(np.asarray(rotvec, dtype=np.float64)).as_matrix()
        target = np.array(self.look_at)
        position = target + Rj @ (np.array(self.position) - target)
        return self._with_pose(position, target, Rj @ self.rotation()[1] * -1.0)

    def _with_pose(self, position: np.ndarray, look_at: np.ndarray, up: np.ndarray) -> "Camera":
        offset = position - look_at
        radius = float(np.linalg.norm(offset))
        elevation = math.asin(max(-1.0, min(1.0, offset[1] / radius)))
        azimuth = math.atan2(offset[0], offset[2])
        return replace(self, position=tuple(position), look_at=tuple(look_at), up=tuple(up),
                       azimuth=azimuth, elevation=elevation, radius=radius)


# --------------------- Text format --------------------- #

_VECTOR_KEYS = ("position", "look_at", "up")


def camera_to_text(camera: Camera) -> str:
    fields = {
        "width": str(camera.image_width),
        "height": str(camera.image_height),
        "focal_px": repr(camera.focal),
        "position": " ".join(repr(v) for v in camera.position),
        "look_at": " ".join(repr(v) for v in camera.look_at),
        "up": " ".join(repr(v) for v in camera.up),
        "azimuth": repr(camera.azimuth),
        "elevation": repr(camera.elevation),
        "radius": repr(camera.radius),
    }
    return "".join(f"{k}={v}\n" for k, v in fields.items())


def camera_from_text(text: str) -> Camera:
    values: Dict[str, str] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise DatasetError(f"malformed camera line {line!r}")
        values[key.strip()] = value.strip()
    try:
        vectors = {k: tuple(float(v) for v in values[k].split()) for k in _VECTOR_KEYS}
        return Camera(
            image_width=int(values["width"]),
            image_height=int(values["height"]),
            focal=float(values["focal_px"]),
            azimuth=float(values["azimuth"]),
            elevation=float(values["elevation"]),
            radius=float(values["radius"]),
            **vectors,
        )
    except KeyError as exc:
        raise DatasetError(f"camera file missing key {exc.args[0]}") from exc


def save_camera(camera: Camera, path: Union[str, Path]) -> None:
    Path(path).write_text(camera_to_text(camera))


def load_camera(path: Union[str, Path]) -> Camera:
    return camera_from_text(Path(path).read_text())
