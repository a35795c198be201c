"""Fixed multi-scale feature pyramid used as the perceptual feature extractor.

Level k (k = 1..4) is the image blurred with a 5×5 binomial kernel and
decimated by two, k times over, then filtered with a bank of eight seeded
zero-mean 3×3×3 filters and rectified with |·|. All operators use zero
padding so the backward pass is the exact adjoint chain.

The loss is Σ_k ‖φ_k(a) − φ_k(b)‖₁ / |φ_k|: each level's L1 norm is divided
by its element count (cells × filters), so every level carries the same
weight whatever its resolution.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import List, Tuple

import numpy as np
from scipy import ndimage

from core.errors import DimensionError
from core.image import ImageBuffer, require_same_shape
from losses.metrics import LossValue, _mask_weights

LEVELS = 4
N_FILTERS = 8
FILTER_SEED = 42

_BINOMIAL_1D = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0
BINOMIAL_5X5 = np.outer(_BINOMIAL_1D, _BINOMIAL_1D)


@lru_cache(maxsize=1)
def filter_bank() -> np.ndarray:
    """(8, 3, 3, 3) filters indexed [out, in_channel, dy, dx]; read-only."""
    rng = np.random.default_rng(FILTER_SEED)
    bank = rng.standard_normal((N_FILTERS, 3, 3, 3))
    bank -= bank.mean(axis=(1, 2, 3), keepdims=True)
    bank /= np.sqrt(np.sum(bank ** 2, axis=(1, 2, 3), keepdims=True))
    bank.setflags(write=False)
    return bank


def _blur(x: np.ndarray) -> np.ndarray:
    return np.stack([ndimage.correlate(x[..., c], BINOMIAL_5X5, mode="constant") for c in range(x.shape[2])], axis=2)


def _filters(x: np.ndarray) -> np.ndarray:
    bank = filter_bank()
    out = np.zeros(x.shape[:2] + (N_FILTERS,))
    for o in range(N_FILTERS):
        for c in range(3):
            out[..., o] += ndimage.correlate(x[..., c], bank[o, c], mode="constant")
    return out


def _filters_adjoint(g: np.ndarray) -> np.ndarray:
    bank = filter_bank()
    out = np.zeros(g.shape[:2] + (3,))
    for o in range(N_FILTERS):
        for c in range(3):
            out[..., c] += ndimage.convolve(g[..., o], bank[o, c], mode="constant")
    return out


@dataclass
class FeaturePyramid:
    levels: List[np.ndarray]      # |φ_k|, shape (⌈h/2ᵏ⌉, ⌈w/2ᵏ⌉, 8)
    responses: List[np.ndarray]   # φ_k before rectification
    inputs: List[np.ndarray]      # decimated image at level k

    @classmethod
    def of(cls, image: ImageBuffer) -> "FeaturePyramid":
        if image.channels != 3:
            raise DimensionError(f"perceptual features need a 3-channel image, got {image.channels}")
        x = image.data
        levels, responses, inputs = [], [], []
        for _ in range(LEVELS):
            x = _blur(x)[::2, ::2]
            r = _filters(x)
            inputs.append(x)
            responses.append(r)
            levels.append(np.abs(r))
        return cls(levels=levels, responses=responses, inputs=inputs)

    def shapes(self) -> List[Tuple[int, int]]:
        return [lvl.shape[:2] for lvl in self.levels]


def _backward(shape: Tuple[int, int, int], pyramid: FeaturePyramid, level_grads: List[np.ndarray]) -> np.ndarray:
    """Gradient image of Σ_k <level_grads[k], |φ_k|> with respect to the source image."""
    carry = None
    for k in reversed(range(LEVELS)):
        g_x = _filters_adjoint(level_grads[k] * np.sign(pyramid.responses[k]))
        if carry is not None:
            g_x = g_x + carry
        parent = shape if k == 0 else pyramid.inputs[k - 1].shape
        up = np.zeros(parent)
        up[::2, ::2] = g_x
        carry = _blur(up)
    return carry


def perceptual(a: ImageBuffer, b: ImageBuffer) -> LossValue:
    """Σ_k mean |φ_k(a) − φ_k(b)| and its gradient with respect to `a`."""
    require_same_shape(a, b)
    pa, pb = FeaturePyramid.of(a), FeaturePyramid.of(b)
    value = 0.0
    grads = []
    for fa, fb in zip(pa.levels, pb.levels):
        diff = fa - fb
        value += float(np.abs(diff).mean())
        grads.append(np.sign(diff) / diff.size)
    return LossValue(value, ImageBuffer(_backward(a.shape, pa, grads)))


def masked_perceptual(a: ImageBuffer, b: ImageBuffer, mask=None) -> float:
    """Perceptual error restricted to a mask: outside it `a` is replaced by `b`."""
    if mask is None:
        return perceptual(a, b).value
    require_same_shape(a, b)
    w = _mask_weights(a, mask)
    return perceptual(ImageBuffer(a.data * w + b.data * (1.0 - w)), b).value
