"""Hemisphere camera sampling around the neck point."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from core.camera import Camera, focal_from_mm
from core.errors import ConfigError

TURNTABLE_AZIMUTHS = (-0.75 * math.pi, -0.5 * math.pi, -0.25 * math.pi, 0.0,
                      0.25 * math.pi, 0.5 * math.pi, 0.75 * math.pi)


@dataclass(frozen=True)
class CameraRig:
    """Intrinsics and orbit shared by every sampled camera."""

    width: int = 512
    height: int = 512
    focal_mm: float = 50.0
    radius: float = 1.05
    center: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    min_elevation: float = 0.0
    max_elevation: float = 0.5 * math.pi
    ring_elevation: float = 0.0
    ring_views: int = 180

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0 or self.radius <= 0 or self.focal_mm <= 0:
            raise ConfigError("camera width, height, radius and focal_mm must be positive")
        if not 0.0 <= self.min_elevation <= self.max_elevation <= 0.5 * math.pi:
            raise ConfigError("elevation range must lie in [0, pi/2]")
        if self.ring_views < 1:
            raise ConfigError("ring_views must be >= 1")

    @property
    def focal(self) -> float:
        return focal_from_mm(self.focal_mm, self.width)

    def at(self, azimuth: float, elevation: float) -> Camera:
        return Camera.orbit(azimuth, elevation, self.radius, self.width, self.height, self.focal, self.center)

    def reference(self) -> Camera:
        """Frontal view: azimuth 0, elevation 0."""
        return self.at(0.0, 0.0)


def sample_camera(seed: int, index: int, rig: CameraRig = CameraRig(), mode: str = "random") -> Camera:
    """Camera `index` of the stream identified by `seed`.

    random: uniform by area over the band of the upper hemisphere between
    min_elevation and max_elevation (sin(elevation) uniform), azimuth uniform.
    ring: `ring_views` evenly spaced azimuths at `ring_elevation`.
    """
    if mode == "ring":
        azimuth = 2.0 * math.pi * (index % rig.ring_views) / rig.ring_views
        if azimuth > math.pi:
            azimuth -= 2.0 * math.pi
        return rig.at(azimuth, rig.ring_elevation)
    if mode != "random":
        raise ConfigError(f"unknown camera sampling mode {mode!r}")
    rng = np.random.default_rng([int(seed), int(index)])
    lo, hi = math.sin(rig.min_elevation), math.sin(rig.max_elevation)
    elevation = math.asin(rng.uniform(lo, hi))
    azimuth = rng.uniform(-math.pi, math.pi)
    return rig.at(azimuth, elevation)


def turntable(rig: CameraRig, elevation: float = 0.0):
    return [rig.at(az, elevation) for az in TURNTABLE_AZIMUTHS]
