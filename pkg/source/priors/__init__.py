"""Diffusion-prior stand-ins and the noise schedule."""

from priors.oracles import (
    BlindEnhancer,
    BlindSynthesizer,
    EnhanceContext,
    EnhancerOracle,
    GroundTruthEnhancer,
    GroundTruthSynthesizer,
    SynthesizerOracle,
    build_oracles,
)
from priors.schedule import NoiseSchedule, forward_diffuse, sample_noise

__all__ = [
    "BlindEnhancer",
    "BlindSynthesizer",
    "EnhanceContext",
    "EnhancerOracle",
    "GroundTruthEnhancer",
    "GroundTruthSynthesizer",
    "NoiseSchedule",
    "SynthesizerOracle",
    "build_oracles",
    "forward_diffuse",
    "sample_noise",
]
