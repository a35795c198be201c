"""Random initial cloud for the coarse stage."""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from core.gaussians import GaussianCloud, logit

DEFAULT_POINTS = 5000
DEFAULT_BOX = 0.3
INIT_OPACITY = 0.1
INIT_GRAY = 0.5
FALLBACK_SCALE_FRACTION = 0.1


def init_cloud(n: int = DEFAULT_POINTS, box_half_extent: float = DEFAULT_BOX, seed: int = 0) -> GaussianCloud:
    """`n` isotropic gray primitives uniform in [-e, e]³.

    Scales start at the mean nearest-neighbour distance of the sampled centres.
    """
    if n < 1:
        raise ValueError("init_cloud needs at least one point")
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-box_half_extent, box_half_extent, size=(n, 3))
    if n > 1:
        dist, _ = cKDTree(centers).query(centers, k=2)
        spacing = float(dist[:, 1].mean())
    else:
        spacing = FALLBACK_SCALE_FRACTION * box_half_extent
    spacing = max(spacing, 1e-6)
    rotations = np.zeros((n, 4))
    rotations[:, 0] = 1.0
    return GaussianCloud(
        centers=centers,
        log_scales=np.full((n, 3), np.log(spacing)),
        rotations=rotations,
        opacity_logits=np.full(n, float(logit(INIT_OPACITY))),
        colors=np.full((n, 3), INIT_GRAY),
    )
