"""Coarse-to-fine optimization: pre-processing, optimizer, density control and stages."""

from pipeline.config import (
    StageConfig,
    coarse_defaults,
    gamma_at,
    learning_rate,
    pixelwise_defaults,
    viewwise_defaults,
)
from pipeline.density import DensifyEvent, densify_and_prune
from pipeline.evaluate import HeldOutView, evaluate_views, mean_metrics
from pipeline.initialize import init_cloud
from pipeline.optimizer import CloudOptimizer
from pipeline.preprocess import (
    align_landmarks,
    compose_aligned_image,
    compose_aligned_mask,
    load_landmarks,
    pad_and_resize,
    resize_landmarks,
    save_landmarks,
)
from pipeline.report import Checkpoint, StageReport
from pipeline.stages import StageContext, coarse_stage, pixelwise_stage, viewwise_stage

__all__ = [
    "Checkpoint",
    "CloudOptimizer",
    "DensifyEvent",
    "HeldOutView",
    "StageConfig",
    "StageContext",
    "StageReport",
    "align_landmarks",
    "coarse_defaults",
    "coarse_stage",
    "compose_aligned_image",
    "compose_aligned_mask",
    "densify_and_prune",
    "evaluate_views",
    "gamma_at",
    "init_cloud",
    "learning_rate",
    "load_landmarks",
    "mean_metrics",
    "pad_and_resize",
    "resize_landmarks",
    "pixelwise_defaults",
    "pixelwise_stage",
    "save_landmarks",
    "viewwise_defaults",
    "viewwise_stage",
]
