"""Masked metrics of a cloud over a set of posed ground-truth views."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.camera import Camera
from core.errors import DegenerateMaskError, DimensionError
from core.gaussians import GaussianCloud
from core.image import ImageBuffer
from losses import METRIC_KEYS, image_metrics
from splat.rasterizer import WHITE, RasterSettings, render

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class HeldOutView:
    camera: Camera
    image: ImageBuffer
    mask: Optional[ImageBuffer] = None
    index: int = 0
    # ground truth read from 8-bit PNG; renders are scored at the same precision
    quantized: bool = False


def evaluate_views(cloud: GaussianCloud, views: Sequence[HeldOutView], background=WHITE,
                   settings: RasterSettings = RasterSettings()) -> Tuple[List[Dict[str, float]], Dict[str, float]]:
    """Per-view rows and their mean.

    A view whose mask selects no pixel yields NaN metrics and is left out of
    the mean.
    """
    rows = []
    for view in views:
        if view.image.shape != (view.camera.image_height, view.camera.image_width, 3):
            raise DimensionError(f"view {view.index}: image {view.image.shape} does not match its camera")
        rendered = render(cloud, view.camera, background, settings).rgb
        if view.quantized:
            rendered = rendered.quantized()
        try:
            row = image_metrics(rendered, view.image, view.mask)
        except DegenerateMaskError:
            logger.debug("view %d has an empty mask; metrics undefined", view.index)
            row = {key: float("nan") for key in METRIC_KEYS}
        rows.append(row)
    return rows, mean_metrics(rows)


def mean_metrics(rows: Sequence[Dict[str, float]]) -> Dict[str, float]:
    if not rows:
        return {}
    out = {}
    for key in METRIC_KEYS:
        values = np.array([row[key] for row in rows], dtype=np.float64)
        out[key] = float(np.nanmean(values)) if np.any(np.isfinite(values)) else float("nan")
    return out
