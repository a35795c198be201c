"""Stage hyperparameters and the γ schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

from core.errors import ConfigError

OPTIMIZERS = ("adam", "sgd")


@dataclass(frozen=True)
class StageConfig:
    name: str = "coarse"
    iters: int = 1000
    batch_views: int = 4
    lr_position: float = 0.001
    lr_color: float = 0.01
    lr_opacity: float = 0.05
    lr_scale: float = 0.005
    lr_rotation: float = 0.005
    lr_floor: float = 2e-5
    optimizer: str = "sgd"
    densify_interval: int = 100
    densify_grad_threshold: float = 0.01
    prune_opacity_threshold: float = 0.01
    percent_dense: float = 0.01
    scene_extent: float = 1.05
    max_primitives: int = 50000
    gamma_start: float = 0.5
    gamma_increment: float = 0.15
    gamma_period: int = 200
    fixed_gamma: Optional[float] = None
    beta: float = 0.5
    ref_view_weight: float = 1.0
    sds_weight: float = 1.0
    checkpoint_interval: int = 100

    def __post_init__(self):
        rates = (self.lr_position, self.lr_color, self.lr_opacity, self.lr_scale, self.lr_rotation, self.lr_floor)
        if any(not r > 0 for r in rates):
            raise ConfigError(f"[{self.name}] learning rates must be positive")
        if self.iters < 0:
            raise ConfigError(f"[{self.name}] iters must be >= 0")
        if self.batch_views < 1:
            raise ConfigError(f"[{self.name}] batch_views must be >= 1")
        if self.densify_interval < 1 or self.gamma_period < 1 or self.checkpoint_interval < 1:
            raise ConfigError(f"[{self.name}] intervals must be >= 1")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"[{self.name}] optimizer must be one of {', '.join(OPTIMIZERS)}")
        if not 0.0 < self.gamma_start <= 1.0 or self.gamma_increment < 0:
            raise ConfigError(f"[{self.name}] gamma_start must lie in (0, 1] and gamma_increment be >= 0")
        if self.fixed_gamma is not None and not 0.0 < self.fixed_gamma <= 1.0:
            raise ConfigError(f"[{self.name}] fixed_gamma must lie in (0, 1]")
        if self.beta < 0 or self.ref_view_weight < 0 or self.sds_weight < 0:
            raise ConfigError(f"[{self.name}] loss weights must be non-negative")
        if self.max_primitives < 1:
            raise ConfigError(f"[{self.name}] max_primitives must be >= 1")

    def with_overrides(self, **changes) -> "StageConfig":
        return replace(self, **changes)


def coarse_defaults() -> StageConfig:
    return StageConfig(name="coarse")


def viewwise_defaults() -> StageConfig:
    return StageConfig(name="viewwise", iters=600, densify_interval=200, densify_grad_threshold=0.0002,
                       checkpoint_interval=200)


def pixelwise_defaults() -> StageConfig:
    return StageConfig(name="pixelwise", iters=1000, densify_interval=200, densify_grad_threshold=0.0002,
                       ref_view_weight=0.0, checkpoint_interval=200)


def gamma_at(step: int, cfg: StageConfig) -> float:
    """min(gamma_start + gamma_increment·⌊step / gamma_period⌋, 1)."""
    if cfg.fixed_gamma is not None:
        return cfg.fixed_gamma
    return min(cfg.gamma_start + cfg.gamma_increment * math.floor(step / cfg.gamma_period), 1.0)


def learning_rate(base: float, floor: float, step: int, iters: int) -> float:
    """Log-linear decay from `base` at step 0 to `floor` at the last step."""
    if iters <= 1:
        return base
    f = min(max(step / (iters - 1), 0.0), 1.0)
    return math.exp((1.0 - f) * math.log(base) + f * math.log(floor))
