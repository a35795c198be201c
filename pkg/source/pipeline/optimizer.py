"""Per-group first-order optimizer over a GaussianCloud (Adam or plain descent)."""

from __future__ import annotations

from typing import Dict

import numpy as np

from core.gaussians import GaussianCloud, normalize_quaternions
from pipeline.config import StageConfig, learning_rate
from splat.gradients import GradientBundle

# gradient field -> (cloud attribute, config rate)
GROUPS = {
    "center": ("centers", "lr_position"),
    "color": ("colors", "lr_color"),
    "opacity_logit": ("opacity_logits", "lr_opacity"),
    "log_scale": ("log_scales", "lr_scale"),
    "rotation": ("rotations", "lr_rotation"),
}

BETA1 = 0.9
BETA2 = 0.999
EPSILON = 1e-15


class CloudOptimizer:
    def __init__(self, cfg: StageConfig, n: int):
        self.cfg = cfg
        self.step_count = 0
        self.m: Dict[str, np.ndarray] = {}
        self.v: Dict[str, np.ndarray] = {}
        self._reset_moments(n)

    def _reset_moments(self, n: int) -> None:
        shapes = {"center": (n, 3), "color": (n, 3), "opacity_logit": (n,), "log_scale": (n, 3), "rotation": (n, 4)}
        self.m = {k: np.zeros(s) for k, s in shapes.items()}
        self.v = {k: np.zeros(s) for k, s in shapes.items()}

    def rates(self, step: int) -> Dict[str, float]:
        return {
            group: learning_rate(getattr(self.cfg, rate), self.cfg.lr_floor, step, self.cfg.iters)
            for group, (_, rate) in GROUPS.items()
        }

    def step(self, cloud: GaussianCloud, grads: GradientBundle, step: int) -> None:
        """One descent update in place, then renormalize quaternions and clamp colours."""
        self.step_count += 1
        rates = self.rates(step)
        for group, (attr, _) in GROUPS.items():
            g = getattr(grads, group)
            if self.cfg.optimizer == "adam":
                self.m[group] = BETA1 * self.m[group] + (1.0 - BETA1) * g
                self.v[group] = BETA2 * self.v[group] + (1.0 - BETA2) * g * g
                m_hat = self.m[group] / (1.0 - BETA1 ** self.step_count)
                v_hat = self.v[group] / (1.0 - BETA2 ** self.step_count)
                update = m_hat / (np.sqrt(v_hat) + EPSILON)
            else:
                update = g
            setattr(cloud, attr, getattr(cloud, attr) - rates[group] * update)
        cloud.rotations = normalize_quaternions(cloud.rotations) if len(cloud) else cloud.rotations
        cloud.colors = np.clip(cloud.colors, 0.0, 1.0)

    def remap(self, origin: np.ndarray) -> None:
        """Carry moments across densify/prune; origin[i] is the old index or -1 for new primitives."""
        origin = np.asarray(origin, dtype=np.int64)
        kept = origin >= 0
        for store in (self.m, self.v):
            for group, old in store.items():
                new = np.zeros((len(origin),) + old.shape[1:])
                new[kept] = old[origin[kept]]
                store[group] = new
