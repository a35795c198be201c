"""2D similarity transforms used to align landmark sets."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SimilarityTransform2D:
    """p -> scale * R(rotation_angle) @ p + translation, in pixels."""

    translation: tuple = (0.0, 0.0)
    rotation_angle: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"similarity scale must be positive, got {self.scale}")
        object.__setattr__(self, "translation", tuple(float(v) for v in self.translation))

    @property
    def rotation(self) -> np.ndarray:
        c, s = math.cos(self.rotation_angle), math.sin(self.rotation_angle)
        return np.array([[c, -s], [s, c]])

    @property
    def matrix(self) -> np.ndarray:
        """Homogeneous 3x3 form."""
        M = np.eye(3)
        M[:2, :2] = self.scale * self.rotation
        M[:2, 2] = self.translation
        return M

    def apply(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return self.scale * points @ self.rotation.T + np.asarray(self.translation)

    def inverse(self) -> "SimilarityTransform2D":
        inv_scale = 1.0 / self.scale
        t = -inv_scale * self.rotation.T @ np.asarray(self.translation)
        return SimilarityTransform2D(tuple(t), -self.rotation_angle, inv_scale)

    @classmethod
    def identity(cls) -> "SimilarityTransform2D":
        return cls()
