"""Stand-ins for the novel-view synthesizer and the detail enhancer.

The ground-truth oracles render a known scene; the blind ones only see the
images they are given. Every oracle is read-only after construction and draws
per-call randomness from an explicit `call_seed`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Protocol, runtime_checkable

import numpy as np
from scipy import ndimage

from core.camera import Camera, RelativePose
from core.errors import DimensionError, MissingCameraError, OracleError
from core.gaussians import GaussianCloud
from core.image import ImageBuffer, require_same_shape
from priors.schedule import NoiseSchedule
from splat.rasterizer import WHITE, RasterSettings, render

logger = logging.getLogger(__name__)


@runtime_checkable
class SynthesizerOracle(Protocol):
    def synthesize(self, input_image: ImageBuffer, gamma: float, condition: ImageBuffer,
                   rel_pose: RelativePose, call_seed: int = 0) -> ImageBuffer:
        ...

    def predict_noise(self, x_t: ImageBuffer, t: int, condition: ImageBuffer,
                      rel_pose: RelativePose, call_seed: int = 0) -> ImageBuffer:
        ...


@dataclass(frozen=True)
class EnhanceContext:
    camera: Optional[Camera] = None


@runtime_checkable
class EnhancerOracle(Protocol):
    def enhance(self, image: ImageBuffer, context: Optional[EnhanceContext] = None) -> ImageBuffer:
        ...


def _check_gamma(gamma: float) -> float:
    if not 0.0 < gamma <= 1.0:
        raise OracleError(f"gamma must lie in (0, 1], got {gamma}")
    return float(gamma)


def _blur(image: np.ndarray, sigma: float) -> np.ndarray:
    if sigma <= 0.0:
        return image
    return ndimage.gaussian_filter(image, sigma=(sigma, sigma, 0.0), mode="nearest")


def _noise_from_x0(x_t: ImageBuffer, x0_hat: ImageBuffer, t: int, schedule: NoiseSchedule) -> ImageBuffer:
    schedule.check(t)
    signal, noise = schedule.coefficients(t)
    return ImageBuffer((x_t.data - signal * x0_hat.data) / noise)


class GroundTruthSynthesizer:
    """Renders the true scene from the requested pose.

    Lower γ means a less faithful prior: the camera is jittered by a random
    rotation of scale jitter_sigma·(1 − γ) about its target and the render is
    blurred by blur_sigma·(1 − γ) pixels.
    """

    def __init__(self, scene: GaussianCloud, reference_camera: Camera, blur_sigma: float = 0.0,
                 jitter_sigma: float = 0.0, seed: int = 0, schedule: Optional[NoiseSchedule] = None,
                 background=WHITE, settings: RasterSettings = RasterSettings()):
        if blur_sigma < 0 or jitter_sigma < 0:
            raise OracleError("corruption strengths must be non-negative")
        self.scene = scene
        self.reference_camera = reference_camera
        self.blur_sigma = float(blur_sigma)
        self.jitter_sigma = float(jitter_sigma)
        self.seed = int(seed)
        self.schedule = schedule or NoiseSchedule()
        self.background = background
        self.settings = settings
        logger.debug("ground-truth synthesizer over %d primitives (blur=%.3g, jitter=%.3g)",
                     len(scene), blur_sigma, jitter_sigma)

    def camera_for(self, rel_pose: RelativePose, gamma: float = 1.0, call_seed: int = 0) -> Camera:
        camera = self.reference_camera.compose(rel_pose)
        spread = self.jitter_sigma * (1.0 - gamma)
        if spread > 0.0:
            rng = np.random.default_rng([self.seed, int(call_seed)])
            camera = camera.rotated_about_target(rng.normal(0.0, spread, size=3))
        return camera

    def synthesize(self, input_image: ImageBuffer, gamma: float, condition: ImageBuffer,
                   rel_pose: RelativePose, call_seed: int = 0) -> ImageBuffer:
        gamma = _check_gamma(gamma)
        camera = self.camera_for(rel_pose, gamma, call_seed)
        if input_image.shape != (camera.image_height, camera.image_width, 3):
            raise DimensionError(f"input {input_image.shape} does not match the reference camera")
        rgb = render(self.scene, camera, self.background, self.settings).rgb.data
        return ImageBuffer(_blur(rgb, self.blur_sigma * (1.0 - gamma)))

    def predict_noise(self, x_t: ImageBuffer, t: int, condition: ImageBuffer, rel_pose: RelativePose,
                      call_seed: int = 0, schedule: Optional[NoiseSchedule] = None) -> ImageBuffer:
        """ε̂ = (x_t − √ᾱ_t·x̂0)/√(1 − ᾱ_t) with x̂0 synthesized at γ = √ᾱ_t."""
        schedule = schedule or self.schedule
        schedule.check(t)
        gamma = schedule.coefficients(t)[0]
        x0_hat = self.synthesize(x_t, gamma, condition, rel_pose, call_seed)
        return _noise_from_x0(x_t, x0_hat, t, schedule)


class BlindSynthesizer:
    """Camera-free synthesizer: a Gaussian denoiser that ignores the pose.

    At the reference pose it returns the condition image itself.
    """

    def __init__(self, blind_sigma: float = 2.0, schedule: Optional[NoiseSchedule] = None):
        if blind_sigma < 0:
            raise OracleError("blind_sigma must be non-negative")
        self.blind_sigma = float(blind_sigma)
        self.schedule = schedule or NoiseSchedule()

    def _denoise(self, image: np.ndarray, gamma: float) -> np.ndarray:
        return np.clip(_blur(image, self.blind_sigma * (1.0 - gamma) + 0.5), 0.0, 1.0)

    def synthesize(self, input_image: ImageBuffer, gamma: float, condition: ImageBuffer,
                   rel_pose: RelativePose, call_seed: int = 0) -> ImageBuffer:
        gamma = _check_gamma(gamma)
        if rel_pose.is_identity():
            require_same_shape(input_image, condition, "input and condition")
            return condition
        return ImageBuffer(self._denoise(input_image.data, gamma))

    def predict_noise(self, x_t: ImageBuffer, t: int, condition: ImageBuffer, rel_pose: RelativePose,
                      call_seed: int = 0, schedule: Optional[NoiseSchedule] = None) -> ImageBuffer:
        schedule = schedule or self.schedule
        schedule.check(t)
        signal, _ = schedule.coefficients(t)
        x0_hat = ImageBuffer(self._denoise(x_t.data / signal, signal))
        return _noise_from_x0(x_t, x0_hat, t, schedule)


class GroundTruthEnhancer:
    """The ideal enhancer: the true scene seen from the rendering camera."""

    def __init__(self, scene: GaussianCloud, background=WHITE, settings: RasterSettings = RasterSettings()):
        self.scene = scene
        self.background = background
        self.settings = settings

    def enhance(self, image: ImageBuffer, context: Optional[EnhanceContext] = None) -> ImageBuffer:
        if context is None or context.camera is None:
            raise MissingCameraError("ground-truth enhancer needs the rendering camera")
        camera = context.camera
        if image.shape[:2] != (camera.image_height, camera.image_width):
            raise DimensionError(f"image {image.shape} does not match camera {camera.image_width}x{camera.image_height}")
        return render(self.scene, camera, self.background, self.settings).rgb


class BlindEnhancer:
    """Unsharp mask: clamp(image + amount·(image − blur(image, sigma)))."""

    def __init__(self, amount: float = 1.0, sigma: float = 1.5):
        self.amount = float(amount)
        self.sigma = float(sigma)

    def enhance(self, image: ImageBuffer, context: Optional[EnhanceContext] = None) -> ImageBuffer:
        if image.channels != 3:
            raise DimensionError(f"enhancer expects an RGB image, got {image.channels} channel(s)")
        if self.amount == 0.0:
            return image
        detail = image.data - _blur(image.data, self.sigma)
        return ImageBuffer(np.clip(image.data + self.amount * detail, 0.0, 1.0))


def build_oracles(kind: str, scene: Optional[GaussianCloud], reference_camera: Camera,
                  blur_sigma: float = 0.0, jitter_sigma: float = 0.0, seed: int = 0,
                  blind_sigma: float = 2.0, unsharp_amount: float = 1.0, unsharp_sigma: float = 1.5,
                  schedule: Optional[NoiseSchedule] = None):
    """(synthesizer, enhancer) for `[prior] kind`."""
    if kind == "gt":
        if scene is None:
            raise OracleError("prior kind 'gt' needs a ground-truth scene (--gt-scene)")
        return (GroundTruthSynthesizer(scene, reference_camera, blur_sigma, jitter_sigma, seed, schedule),
                GroundTruthEnhancer(scene))
    if kind == "blind":
        return BlindSynthesizer(blind_sigma, schedule), BlindEnhancer(unsharp_amount, unsharp_sigma)
    raise OracleError(f"unknown prior kind {kind!r}")
