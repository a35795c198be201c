"""Per-primitive parameter gradients returned by the backward pass."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PARAMETER_GROUPS = ("center", "log_scale", "rotation", "opacity_logit", "color")


@dataclass
class GradientBundle:
    center: np.ndarray          # (N, 3)
    log_scale: np.ndarray       # (N, 3)
    rotation: np.ndarray        # (N, 4)
    opacity_logit: np.ndarray   # (N,)
    color: np.ndarray           # (N, 3)
    mean2d_norm: np.ndarray     # (N,) NDC-scaled 2D positional gradient magnitude
    seen: np.ndarray            # (N,) bool, primitive was visible in the view

    @classmethod
    def zeros(cls, n: int) -> "GradientBundle":
        return cls(np.zeros((n, 3)), np.zeros((n, 3)), np.zeros((n, 4)), np.zeros(n),
                   np.zeros((n, 3)), np.zeros(n), np.zeros(n, dtype=bool))

    def __len__(self) -> int:
        return len(self.opacity_logit)

    def __add__(self, other: "GradientBundle") -> "GradientBundle":
        return GradientBundle(
            self.center + other.center,
            self.log_scale + other.log_scale,
            self.rotation + other.rotation,
            self.opacity_logit + other.opacity_logit,
            self.color + other.color,
            self.mean2d_norm + other.mean2d_norm,
            self.seen | other.seen,
        )

    def scaled(self, k: float) -> "GradientBundle":
        return GradientBundle(self.center * k, self.log_scale * k, self.rotation * k,
                              self.opacity_logit * k, self.color * k, self.mean2d_norm * abs(k), self.seen)

    def flat(self) -> np.ndarray:
        """All 14 partials per primitive, in cloud-file order."""
        return np.concatenate([self.center, self.log_scale, self.rotation,
                               self.opacity_logit[:, None], self.color], axis=1)

    def dot(self, direction: np.ndarray) -> float:
        return float(np.sum(self.flat() * direction))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.flat())))
