"""Adaptive density control: split, clone and prune."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from core.gaussians import GaussianCloud, quaternion_to_matrix
from pipeline.config import StageConfig

logger = logging.getLogger(__name__)

SPLIT_SCALE_DIVISOR = 1.6
SPLIT_OFFSET_SIGMA = 0.5
CLONE_OFFSET_SIGMA = 0.5


@dataclass(frozen=True)
class DensifyEvent:
    step: int
    before: int
    splits: int
    clones: int
    pruned: int
    after: int

    def consistent(self) -> bool:
        return self.after == self.before + self.splits + self.clones - self.pruned

    def as_fields(self):
        return {"step": self.step, "before": self.before, "splits": self.splits,
                "clones": self.clones, "pruned": self.pruned, "after": self.after}


def _select_candidates(cloud: GaussianCloud, threshold: float, budget: int) -> np.ndarray:
    """Indices over the gradient threshold, largest gradient first, at most `budget` of them."""
    candidates = np.flatnonzero(cloud.grad_accum > threshold)
    if len(candidates) > budget:
        order = np.lexsort((candidates, -cloud.grad_accum[candidates]))
        candidates = np.sort(candidates[order[:max(budget, 0)]])
    return candidates


def _split_children(cloud: GaussianCloud, idx: np.ndarray) -> GaussianCloud:
    """Two children per parent at ±0.5σ along its largest axis, scales divided by 1.6."""
    parents = cloud.subset(idx)
    axis = np.argmax(parents.log_scales, axis=1)
    R = quaternion_to_matrix(parents.rotations) if len(idx) else np.zeros((0, 3, 3))
    direction = R[np.arange(len(idx)), :, axis]
    offset = SPLIT_OFFSET_SIGMA * parents.scales[np.arange(len(idx)), axis][:, None] * direction
    children = GaussianCloud.concatenate([parents.copy(), parents.copy()])
    children.centers = np.concatenate([parents.centers + offset, parents.centers - offset])
    children.log_scales = children.log_scales - np.log(SPLIT_SCALE_DIVISOR)
    return children


def _clones(cloud: GaussianCloud, idx: np.ndarray) -> GaussianCloud:
    """Copies moved half a σ along the accumulated descent direction of their centre."""
    clones = cloud.subset(idx)
    g = clones.center_grad
    norm = np.linalg.norm(g, axis=1, keepdims=True)
    direction = np.where(norm > 0, -g / np.where(norm > 0, norm, 1.0), 0.0)
    clones.centers = clones.centers + CLONE_OFFSET_SIGMA * clones.scales.max(axis=1, keepdims=True) * direction
    return clones


def densify_and_prune(cloud: GaussianCloud, cfg: StageConfig, step: int = 0) -> Tuple[GaussianCloud, DensifyEvent, np.ndarray]:
    """Densify by positional-gradient statistics, then prune near-transparent primitives.

    Returns the new cloud (statistics reset), the event and, for every new
    primitive, the index it kept from the old cloud (-1 for children and clones).
    """
    n = len(cloud)
    budget = max(cfg.max_primitives - n, 0)
    candidates = _select_candidates(cloud, cfg.densify_grad_threshold, budget)
    large = cloud.scales[candidates].max(axis=1) > cfg.percent_dense * cfg.scene_extent if len(candidates) else np.zeros(0, bool)
    split_idx, clone_idx = candidates[large], candidates[~large]

    keep = np.ones(n, dtype=bool)
    keep[split_idx] = False
    survivors = np.flatnonzero(keep)
    grown = GaussianCloud.concatenate([cloud.subset(survivors), _clones(cloud, clone_idx), _split_children(cloud, split_idx)])
    origin = np.concatenate([survivors, np.full(len(grown) - len(survivors), -1)])

    alive = grown.opacities >= cfg.prune_opacity_threshold
    result = grown.subset(alive) if len(grown) else grown
    result.reset_stats()
    origin = origin[alive] if len(grown) else origin

    event = DensifyEvent(step=step, before=n, splits=len(split_idx), clones=len(clone_idx),
                         pruned=int((~alive).sum()), after=len(result))
    logger.debug("densify at step %d: %s", step, event.as_fields())
    return result, event, origin.astype(np.int64)
