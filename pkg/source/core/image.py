"""Image buffers and PNG input/output."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
from PIL import Image

from core.errors import DimensionError

PNG_LEVELS = 255.0


@dataclass(frozen=True)
class ImageBuffer:
    """Row-major float image of shape (height, width, channels), channels 1 or 3.

    Values of rendered images lie in [0, 1]; upstream gradient images use the
    same type and may take any finite value.
    """

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 2:
            data = data[..., None]
        if data.ndim != 3 or data.shape[2] not in (1, 3):
            raise DimensionError(f"image must be HxWx1 or HxWx3, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("image contains non-finite values")
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self):
        return self.data.shape

    @classmethod
    def zeros(cls, width: int, height: int, channels: int = 3) -> "ImageBuffer":
        return cls(np.zeros((height, width, channels)))

    @classmethod
    def filled(cls, width: int, height: int, value) -> "ImageBuffer":
        value = np.atleast_1d(np.asarray(value, dtype=np.float64))
        return cls(np.broadcast_to(value, (height, width, value.size)).copy())

    def clamped(self) -> "ImageBuffer":
        return ImageBuffer(np.clip(self.data, 0.0, 1.0))

    def quantized(self) -> "ImageBuffer":
        """The image as it reads back from an 8-bit PNG."""
        return ImageBuffer(_to_levels(self.data) / PNG_LEVELS)

    def gray(self) -> np.ndarray:
        """Single-channel view as an (H, W) array."""
        return self.data[..., 0] if self.channels == 1 else self.data.mean(axis=2)


def _to_levels(data: np.ndarray) -> np.ndarray:
    return np.round(np.clip(data, 0.0, 1.0) * PNG_LEVELS)


def require_same_shape(a: ImageBuffer, b: ImageBuffer, what: str = "images") -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{what} differ in shape: {a.shape} vs {b.shape}")


def save_png(image: ImageBuffer, path: Union[str, Path]) -> None:
    """8-bit PNG; [0,1] floats are mapped linearly, no gamma transform."""
    pixels = _to_levels(image.data).astype(np.uint8)
    mode = "L" if image.channels == 1 else "RGB"
    Image.fromarray(pixels[..., 0] if image.channels == 1 else pixels, mode=mode).save(path)


def load_png(path: Union[str, Path], channels: Optional[int] = 3) -> ImageBuffer:
    with Image.open(path) as img:
        img = img.convert("L" if channels == 1 else "RGB")
        pixels = np.asarray(img, dtype=np.float64) / PNG_LEVELS
    return ImageBuffer(pixels)


def hstack(images) -> ImageBuffer:
    return ImageBuffer(np.concatenate([im.data for im in images], axis=1))
