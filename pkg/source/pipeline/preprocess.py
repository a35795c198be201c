"""Input pre-processing: landmark alignment and hair-over-body compositing."""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Tuple, Union

import numpy as np
from PIL import Image
from scipy import ndimage

from core.errors import DatasetError, DimensionError, RankError
from core.image import ImageBuffer
from core.transforms import SimilarityTransform2D

logger = logging.getLogger(__name__)

N_LANDMARKS = 68


def align_landmarks(lmk_h: np.ndarray, lmk_b: np.ndarray) -> Tuple[SimilarityTransform2D, float]:
    """Least-squares similarity T with T(lmk_h) ≈ lmk_b, and its RMSE in pixels."""
    X = np.asarray(lmk_h, dtype=np.float64)
    Y = np.asarray(lmk_b, dtype=np.float64)
    if X.shape != Y.shape or X.ndim != 2 or X.shape[1] != 2:
        raise RankError(f"landmark sets must both be (n, 2), got {X.shape} and {Y.shape}")
    if len(X) < 2:
        raise RankError("at least two landmark pairs are needed")
    mu_x, mu_y = X.mean(axis=0), Y.mean(axis=0)
    Xc, Yc = X - mu_x, Y - mu_y
    var_x = np.square(Xc).sum(axis=1).mean()
    if var_x < 1e-12 or np.square(Yc).sum(axis=1).mean() < 1e-12:
        raise RankError("landmarks are degenerate (all points coincide)")

    cov_xy = Yc.T @ Xc / len(X)
    U, D, VH = np.linalg.svd(cov_xy)
    S = np.eye(2)
    if np.linalg.det(U) * np.linalg.det(VH) < 0:
        S[-1, -1] = -1
    R = U @ S @ VH
    scale = float(np.trace(np.diag(D) @ S) / var_x)
    if scale <= 0:
        raise RankError("landmark correspondence admits no proper similarity")
    translation = mu_y - scale * R @ mu_x
    xf = SimilarityTransform2D(tuple(translation), math.atan2(R[1, 0], R[0, 0]), scale)
    rmse = float(np.sqrt(np.mean(np.sum((xf.apply(X) - Y) ** 2, axis=1))))
    logger.debug("landmark alignment: s=%.4f r=%.4f t=(%.2f, %.2f) rmse=%.3g px",
                 scale, xf.rotation_angle, *xf.translation, rmse)
    return xf, rmse


def load_landmarks(path: Union[str, Path]) -> np.ndarray:
    """68 rows of `x y`."""
    try:
        points = np.loadtxt(path, dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise DatasetError(f"{path}: landmark rows must be 'x y' numbers") from exc
    if points.shape != (N_LANDMARKS, 2):
        raise DatasetError(f"{path}: expected {N_LANDMARKS} rows of 'x y', got shape {points.shape}")
    return points


def save_landmarks(points: np.ndarray, path: Union[str, Path]) -> None:
    np.savetxt(path, np.asarray(points), fmt="%.17g")


def warp_image(image: ImageBuffer, xf: SimilarityTransform2D, width: int, height: int) -> ImageBuffer:
    """Resample `image` under `xf` (source pixel coords -> output pixel coords), bilinear, zero outside."""
    inv = xf.inverse()
    jj, ii = np.meshgrid(np.arange(width) + 0.5, np.arange(height) + 0.5)
    src = inv.apply(np.stack([jj.ravel(), ii.ravel()], axis=1))
    # map_coordinates indexes sample centres at integers
    rows, cols = src[:, 1] - 0.5, src[:, 0] - 0.5
    channels = [
        ndimage.map_coordinates(image.data[..., c], [rows, cols], order=1, mode="constant", cval=0.0)
        for c in range(image.channels)
    ]
    return ImageBuffer(np.stack(channels, axis=1).reshape(height, width, image.channels))


def compose_aligned_image(hair_rgb: ImageBuffer, hair_mask: ImageBuffer, body_image: ImageBuffer,
                          xf: SimilarityTransform2D) -> ImageBuffer:
    """Warp the hair layer by `xf` and alpha-composite it over the body image."""
    if hair_mask.shape[:2] != hair_rgb.shape[:2]:
        raise DimensionError("hair mask and hair image differ in size")
    h, w = body_image.height, body_image.width
    rgb = warp_image(hair_rgb, xf, w, h).data
    alpha = np.clip(warp_image(ImageBuffer(hair_mask.data[..., :1]), xf, w, h).data, 0.0, 1.0)
    return ImageBuffer(np.clip(alpha * rgb + (1.0 - alpha) * body_image.data, 0.0, 1.0))


def compose_aligned_mask(hair_mask: ImageBuffer, body_alpha: ImageBuffer, xf: SimilarityTransform2D) -> ImageBuffer:
    """Union (alpha-over) of the warped hair mask and the body alpha."""
    h, w = body_alpha.height, body_alpha.width
    a = np.clip(warp_image(ImageBuffer(hair_mask.data[..., :1]), xf, w, h).data, 0.0, 1.0)
    b = np.clip(body_alpha.data[..., :1], 0.0, 1.0)
    return ImageBuffer(a + (1.0 - a) * b)


def pad_and_resize(image: ImageBuffer, size: int, background=(1.0, 1.0, 1.0)) -> ImageBuffer:
    """Pad to a centred square filled with `background`, then resize to size×size."""
    h, w, c = image.shape
    side = max(h, w)
    fill = np.asarray(background, dtype=np.float64)[:c] if c == 3 else np.array([float(np.mean(background))])
    canvas = np.broadcast_to(fill, (side, side, c)).copy()
    top, left = (side - h) // 2, (side - w) // 2
    canvas[top:top + h, left:left + w] = image.data
    if side == size:
        return ImageBuffer(canvas)
    pixels = np.round(np.clip(canvas, 0.0, 1.0) * 255.0).astype(np.uint8)
    img = Image.fromarray(pixels[..., 0] if c == 1 else pixels, mode="L" if c == 1 else "RGB")
    resized = np.asarray(img.resize((size, size), Image.BILINEAR), dtype=np.float64) / 255.0
    return ImageBuffer(resized)


def resize_landmarks(points: np.ndarray, shape: Tuple[int, int], size: int) -> np.ndarray:
    """Landmark pixel positions after `pad_and_resize` of an image of `shape` (h, w)."""
    h, w = shape
    side = max(h, w)
    offset = np.array([(side - w) // 2, (side - h) // 2], dtype=np.float64)
    return (np.asarray(points, dtype=np.float64) + offset) * (size / side)
