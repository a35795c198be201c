"""Losses, metrics and the SDS gradient."""

from typing import Dict, Optional

from core.image import ImageBuffer
from losses.metrics import LossValue, l1, l1_with_grad, mse, psnr, reference_loss
from losses.perceptual import FeaturePyramid, filter_bank, masked_perceptual, perceptual
from losses.sds import sds_grad

METRIC_KEYS = ("l1", "psnr_db", "perceptual")


def image_metrics(rendered: ImageBuffer, target: ImageBuffer, mask: Optional[ImageBuffer] = None) -> Dict[str, float]:
    """Masked l1 / psnr_db / perceptual of one view."""
    return {
        "l1": l1(rendered, target, mask),
        "psnr_db": psnr(rendered, target, mask),
        "perceptual": masked_perceptual(rendered, target, mask),
    }


__all__ = [
    "METRIC_KEYS",
    "FeaturePyramid",
    "LossValue",
    "filter_bank",
    "image_metrics",
    "l1",
    "l1_with_grad",
    "masked_perceptual",
    "mse",
    "perceptual",
    "psnr",
    "reference_loss",
    "sds_grad",
]
