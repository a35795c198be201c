import numpy as np
import pytest

from core.camera import Camera
from core.gaussians import GaussianCloud, logit


def random_cloud(n: int, seed: int, spread: float = 0.15, opacity=(0.2, 0.8), scale=(0.03, 0.08)) -> GaussianCloud:
    """Primitives scattered around the origin, seen by `small_camera`."""
    rng = np.random.default_rng(seed)
    q = rng.normal(size=(n, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    return GaussianCloud(
        centers=rng.uniform(-spread, spread, size=(n, 3)),
        log_scales=np.log(rng.uniform(*scale, size=(n, 3))),
        rotations=q,
        opacity_logits=logit(rng.uniform(*opacity, size=n)),
        colors=rng.uniform(0.1, 0.9, size=(n, 3)),
    )


def single_primitive(center=(0.0, 0.0, 0.0), scale=0.05, opacity=0.5, color=(1.0, 0.0, 0.0)) -> GaussianCloud:
    return GaussianCloud(
        centers=[center],
        log_scales=[np.log([scale, scale, scale])],
        rotations=[[1.0, 0.0, 0.0, 0.0]],
        opacity_logits=[float(logit(opacity))],
        colors=[color],
    )


@pytest.fixture
def small_camera() -> Camera:
    """32x32 frontal camera one unit from the origin."""
    return Camera.orbit(0.0, 0.0, 1.0, 32, 32, 40.0)


@pytest.fixture
def tiny_camera() -> Camera:
    return Camera.orbit(0.3, 0.2, 1.0, 16, 16, 20.0)
