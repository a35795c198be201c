"""Linear DDPM noise schedule and the forward (noising) process."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from core.errors import TimestepRangeError
from core.image import ImageBuffer, require_same_shape


@dataclass(frozen=True)
class NoiseSchedule:
    """β_t linear in [beta_start, beta_end] for t = 1..T.

    `alpha_bar` has T + 1 entries with alpha_bar[0] = 1 so that timestep 0
    means "no noise"; timesteps used for training signals are sampled from
    [t_min, t_max] = [0.02·T, 0.98·T].
    """

    T: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02
    alpha_bar: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.T < 1 or not 0.0 < self.beta_start <= self.beta_end < 1.0:
            raise ValueError(f"invalid noise schedule T={self.T}, betas=({self.beta_start}, {self.beta_end})")
        betas = np.linspace(self.beta_start, self.beta_end, self.T)
        alpha_bar = np.concatenate([[1.0], np.cumprod(1.0 - betas)])
        alpha_bar.setflags(write=False)
        object.__setattr__(self, "alpha_bar", alpha_bar)

    @property
    def t_min(self) -> int:
        return max(1, int(round(0.02 * self.T)))

    @property
    def t_max(self) -> int:
        return int(round(0.98 * self.T))

    def sample_timestep(self, rng: np.random.Generator) -> int:
        return int(rng.integers(self.t_min, self.t_max + 1))

    def check(self, t: int, allow_zero: bool = False) -> int:
        lo = 0 if allow_zero else 1
        if not lo <= int(t) <= self.T or int(t) != t:
            raise TimestepRangeError(f"timestep {t} outside [{lo}, {self.T}]")
        return int(t)

    def coefficients(self, t: int):
        """(√ᾱ_t, √(1 − ᾱ_t))."""
        a = self.alpha_bar[int(t)]
        return float(np.sqrt(a)), float(np.sqrt(1.0 - a))

    def weight(self, t: int) -> float:
        return float(1.0 - self.alpha_bar[int(t)])


def forward_diffuse(x0: ImageBuffer, t: int, eps: ImageBuffer, schedule: NoiseSchedule) -> ImageBuffer:
    """√ᾱ_t·x0 + √(1 − ᾱ_t)·eps."""
    schedule.check(t, allow_zero=True)
    require_same_shape(x0, eps, "image and noise")
    signal, noise = schedule.coefficients(t)
    return ImageBuffer(signal * x0.data + noise * eps.data)


def sample_noise(shape, rng: np.random.Generator) -> ImageBuffer:
    return ImageBuffer(rng.standard_normal(shape))
