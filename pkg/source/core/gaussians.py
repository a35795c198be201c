"""Gaussian primitives, clouds and their rotation/covariance math.

A cloud is stored as parallel arrays (struct of arrays). Scales live in log
space and opacities in logit space so unconstrained gradient steps keep them
valid; colours are plain RGB.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, List, Optional

import numpy as np

logger = logging.getLogger(__name__)

# Zero quaternions met by quaternion_to_matrix / normalize_quaternions.
DIAGNOSTICS = {"zero_quaternions": 0}

_IDENTITY_Q = np.array([1.0, 0.0, 0.0, 0.0])


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=np.float64)))


def logit(p):
    p = np.asarray(p, dtype=np.float64)
    return np.log(p) - np.log1p(-p)


def normalize_quaternions(q: np.ndarray) -> np.ndarray:
    """Unit quaternions (w, x, y, z); zero rows fall back to identity."""
    q = np.asarray(q, dtype=np.float64)
    single = q.ndim == 1
    q = np.atleast_2d(q)
    norms = np.linalg.norm(q, axis=1, keepdims=True)
    zero = norms[:, 0] < 1e-12
    if np.any(zero):
        DIAGNOSTICS["zero_quaternions"] += int(zero.sum())
        logger.debug("normalized %d zero quaternion(s) to identity", int(zero.sum()))
    out = np.where(zero[:, None], _IDENTITY_Q, q / np.where(zero[:, None], 1.0, norms))
    return out[0] if single else out


def quaternion_to_matrix(q: np.ndarray) -> np.ndarray:
    """Rotation matrix of a quaternion (w, x, y, z); accepts (4,) or (N, 4)."""
    q = normalize_quaternions(q)
    single = q.ndim == 1
    w, x, y, z = np.atleast_2d(q).T
    R = np.empty((w.size, 3, 3))
    R[:, 0, 0] = 1 - 2 * (y * y + z * z)
    R[:, 0, 1] = 2 * (x * y - w * z)
    R[:, 0, 2] = 2 * (x * z + w * y)
    R[:, 1, 0] = 2 * (x * y + w * z)
    R[:, 1, 1] = 1 - 2 * (x * x + z * z)
    R[:, 1, 2] = 2 * (y * z - w * x)
    R[:, 2, 0] = 2 * (x * z - w * y)
    R[:, 2, 1] = 2 * (y * z + w * x)
    R[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return R[0] if single else R


def rotation_jacobian(q_unit: np.ndarray) -> np.ndarray:
    """dR/dq for unit quaternions: shape (N, 4, 3, 3)."""
    w, x, y, z = np.atleast_2d(q_unit).T
    zero = np.zeros_like(w)
    dw = np.stack([
        np.stack([zero, -2 * z, 2 * y], -1),
        np.stack([2 * z, zero, -2 * x], -1),
        np.stack([-2 * y, 2 * x, zero], -1),
    ], -2)
    dx = np.stack([
        np.stack([zero, 2 * y, 2 * z], -1),
        np.stack([2 * y, -4 * x, -2 * w], -1),
        np.stack([2 * z, 2 * w, -4 * x], -1),
    ], -2)
    dy = np.stack([
        np.stack([-4 * y, 2 * x, 2 * w], -1),
        np.stack([2 * x, zero, 2 * z], -1),
        np.stack([-2 * w, 2 * z, -4 * y], -1),
    ], -2)
    dz = np.stack([
        np.stack([-4 * z, -2 * w, 2 * x], -1),
        np.stack([2 * w, -4 * z, 2 * y], -1),
        np.stack([2 * x, 2 * y, zero], -1),
    ], -2)
    return np.stack([dw, dx, dy, dz], axis=1)


def covariance_from_params(log_scales: np.ndarray, rotations: np.ndarray) -> np.ndarray:
    """Batched Σ = R diag(exp(s))² Rᵀ, shape (N, 3, 3)."""
    R = quaternion_to_matrix(np.atleast_2d(rotations))
    M = R * np.exp(np.atleast_2d(log_scales))[:, None, :]
    return M @ np.transpose(M, (0, 2, 1))


@dataclass(frozen=True)
class GaussianPrimitive:
    center: np.ndarray
    log_scale: np.ndarray
    rotation: np.ndarray
    opacity_logit: float
    color: np.ndarray

    @property
    def scale(self) -> np.ndarray:
        return np.exp(self.log_scale)

    @property
    def opacity(self) -> float:
        return float(sigmoid(self.opacity_logit))

    @property
    def rgb(self) -> np.ndarray:
        return np.clip(self.color, 0.0, 1.0)


def covariance_3d(p: GaussianPrimitive) -> np.ndarray:
    return covariance_from_params(p.log_scale, p.rotation)[0]


def _empty(shape) -> np.ndarray:
    return np.zeros(shape, dtype=np.float64)


@dataclass
class GaussianCloud:
    """The optimizable scene.

    `grad_accum` holds the running mean of each primitive's 2D positional
    gradient magnitude, `grad_count` how many views fed it and `center_grad`
    the summed 3D centre gradient (used to orient clones).
    """

    centers: np.ndarray = field(default_factory=lambda: _empty((0, 3)))
    log_scales: np.ndarray = field(default_factory=lambda: _empty((0, 3)))
    rotations: np.ndarray = field(default_factory=lambda: _empty((0, 4)))
    opacity_logits: np.ndarray = field(default_factory=lambda: _empty((0,)))
    colors: np.ndarray = field(default_factory=lambda: _empty((0, 3)))
    grad_accum: Optional[np.ndarray] = None
    grad_count: Optional[np.ndarray] = None
    center_grad: Optional[np.ndarray] = None

    def __post_init__(self):
        self.centers = np.asarray(self.centers, dtype=np.float64).reshape(-1, 3)
        self.log_scales = np.asarray(self.log_scales, dtype=np.float64).reshape(-1, 3)
        self.rotations = np.asarray(self.rotations, dtype=np.float64).reshape(-1, 4)
        self.opacity_logits = np.asarray(self.opacity_logits, dtype=np.float64).reshape(-1)
        self.colors = np.asarray(self.colors, dtype=np.float64).reshape(-1, 3)
        n = len(self.centers)
        lengths = {len(self.log_scales), len(self.rotations), len(self.opacity_logits), len(self.colors)}
        if lengths != {n}:
            raise ValueError("cloud arrays must have equal length")
        if self.grad_accum is None or len(self.grad_accum) != n:
            self.reset_stats()

    def __len__(self) -> int:
        return len(self.centers)

    def __getitem__(self, i: int) -> GaussianPrimitive:
        return GaussianPrimitive(
            center=self.centers[i].copy(),
            log_scale=self.log_scales[i].copy(),
            rotation=self.rotations[i].copy(),
            opacity_logit=float(self.opacity_logits[i]),
            color=self.colors[i].copy(),
        )

    @property
    def primitives(self) -> List[GaussianPrimitive]:
        return [self[i] for i in range(len(self))]

    @property
    def scales(self) -> np.ndarray:
        return np.exp(self.log_scales)

    @property
    def opacities(self) -> np.ndarray:
        return sigmoid(self.opacity_logits)

    @property
    def rgb(self) -> np.ndarray:
        """Colours clamped to [0, 1] on read."""
        return np.clip(self.colors, 0.0, 1.0)

    @classmethod
    def from_primitives(cls, primitives: Iterable[GaussianPrimitive]) -> "GaussianCloud":
        prims = list(primitives)
        if not prims:
            return cls()
        return cls(
            centers=np.stack([p.center for p in prims]),
            log_scales=np.stack([p.log_scale for p in prims]),
            rotations=np.stack([p.rotation for p in prims]),
            opacity_logits=np.array([p.opacity_logit for p in prims]),
            colors=np.stack([p.color for p in prims]),
        )

    @classmethod
    def concatenate(cls, clouds: Iterable["GaussianCloud"]) -> "GaussianCloud":
        clouds = [c for c in clouds if len(c)]
        if not clouds:
            return cls()
        return cls(
            centers=np.concatenate([c.centers for c in clouds]),
            log_scales=np.concatenate([c.log_scales for c in clouds]),
            rotations=np.concatenate([c.rotations for c in clouds]),
            opacity_logits=np.concatenate([c.opacity_logits for c in clouds]),
            colors=np.concatenate([c.colors for c in clouds]),
        )

    def copy(self) -> "GaussianCloud":
        return GaussianCloud(
            centers=self.centers.copy(),
            log_scales=self.log_scales.copy(),
            rotations=self.rotations.copy(),
            opacity_logits=self.opacity_logits.copy(),
            colors=self.colors.copy(),
            grad_accum=self.grad_accum.copy(),
            grad_count=self.grad_count.copy(),
            center_grad=self.center_grad.copy(),
        )

    def subset(self, index) -> "GaussianCloud":
        """Primitives selected by an index array or boolean mask, stats included."""
        return GaussianCloud(
            centers=self.centers[index],
            log_scales=self.log_scales[index],
            rotations=self.rotations[index],
            opacity_logits=self.opacity_logits[index],
            colors=self.colors[index],
            grad_accum=self.grad_accum[index],
            grad_count=self.grad_count[index],
            center_grad=self.center_grad[index],
        )

    def reset_stats(self) -> None:
        n = len(self.centers)
        self.grad_accum = np.zeros(n)
        self.grad_count = np.zeros(n, dtype=np.int64)
        self.center_grad = np.zeros((n, 3))

    def accumulate_stats(self, mean2d_norm: np.ndarray, center_grad: np.ndarray, seen: np.ndarray) -> None:
        """Fold one view's positional gradients into the running means."""
        seen = np.asarray(seen, dtype=bool)
        count = self.grad_count[seen] + 1
        self.grad_accum[seen] += (mean2d_norm[seen] - self.grad_accum[seen]) / count
        self.grad_count[seen] = count
        self.center_grad[seen] += center_grad[seen]

    def quaternion_norm_error(self) -> float:
        if len(self) == 0:
            return 0.0
        return float(np.max(np.abs(np.linalg.norm(self.rotations, axis=1) - 1.0)))

    def parameters_equal(self, other: "GaussianCloud") -> bool:
        return (len(self) == len(other)
                and np.array_equal(self.centers, other.centers)
                and np.array_equal(self.log_scales, other.log_scales)
                and np.array_equal(self.rotations, other.rotations)
                and np.array_equal(self.opacity_logits, other.opacity_logits)
                and np.array_equal(self.colors, other.colors))
