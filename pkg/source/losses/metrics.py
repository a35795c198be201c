"""Pixel losses and image metrics.

Every loss returns its value and the gradient image(s) with respect to the
first argument, ready to be handed to `render_backward`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from core.errors import DegenerateMaskError, DimensionError
from core.image import ImageBuffer, require_same_shape
from splat.rasterizer import RenderedView

MASK_THRESHOLD = 0.5
PSNR_CAP_DB = 100.0


@dataclass(frozen=True)
class LossValue:
    value: float
    d_rgb: ImageBuffer
    d_alpha: Optional[ImageBuffer] = None


def _mask_weights(a: ImageBuffer, mask: Optional[ImageBuffer]) -> np.ndarray:
    """0/1 weights broadcastable over `a`; raises on an empty mask."""
    if mask is None:
        return np.ones(a.shape[:2] + (1,))
    if mask.shape[:2] != a.shape[:2]:
        raise DimensionError(f"mask shape {mask.shape} does not match image shape {a.shape}")
    inside = (mask.gray() >= MASK_THRESHOLD)[..., None].astype(np.float64)
    if not inside.any():
        raise DegenerateMaskError("mask selects no pixels")
    return inside


def l1(a: ImageBuffer, b: ImageBuffer, mask: Optional[ImageBuffer] = None) -> float:
    return l1_with_grad(a, b, mask).value


def l1_with_grad(a: ImageBuffer, b: ImageBuffer, mask: Optional[ImageBuffer] = None) -> LossValue:
    """Mean absolute difference over the pixels inside `mask` (all pixels without one)."""
    require_same_shape(a, b)
    w = _mask_weights(a, mask)
    count = w.sum() * a.channels
    diff = a.data - b.data
    value = float(np.sum(np.abs(diff) * w) / count)
    return LossValue(value, ImageBuffer(np.sign(diff) * w / count))


def mse(a: ImageBuffer, b: ImageBuffer, mask: Optional[ImageBuffer] = None) -> float:
    require_same_shape(a, b)
    w = _mask_weights(a, mask)
    return float(np.sum((a.data - b.data) ** 2 * w) / (w.sum() * a.channels))


def psnr(a: ImageBuffer, b: ImageBuffer, mask: Optional[ImageBuffer] = None) -> float:
    """10·log10(1/MSE) in dB, capped at 100 dB for identical inputs."""
    err = mse(a, b, mask)
    if err <= 10.0 ** (-PSNR_CAP_DB / 10.0):
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * math.log10(1.0 / err))


def reference_loss(rendered: RenderedView, target_rgb: ImageBuffer, target_mask: ImageBuffer) -> LossValue:
    """Mean L1 of colour plus mean L1 of transparency against the aligned input."""
    require_same_shape(rendered.rgb, target_rgb, "rendered and target rgb")
    if target_mask.shape[:2] != rendered.alpha.shape[:2]:
        raise DimensionError(f"target mask shape {target_mask.shape} does not match render {rendered.alpha.shape}")
    mask = target_mask.data[..., :1] if target_mask.channels == 1 else target_mask.data.mean(axis=2, keepdims=True)

    d_rgb = rendered.rgb.data - target_rgb.data
    d_alpha = rendered.alpha.data - mask
    value = float(np.abs(d_rgb).mean() + np.abs(d_alpha).mean())
    return LossValue(value, ImageBuffer(np.sign(d_rgb) / d_rgb.size), ImageBuffer(np.sign(d_alpha) / d_alpha.size))
