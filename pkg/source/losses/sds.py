"""Score-distillation upstream gradient."""

from __future__ import annotations

from core.camera import RelativePose
from core.image import ImageBuffer
from priors.oracles import SynthesizerOracle
from priors.schedule import NoiseSchedule, forward_diffuse
from splat.rasterizer import RenderedView


def sds_grad(rendered: RenderedView, condition: ImageBuffer, rel_pose: RelativePose, t: int,
             eps: ImageBuffer, oracle: SynthesizerOracle, schedule: NoiseSchedule,
             call_seed: int = 0) -> ImageBuffer:
    """w(t)·(ε̂ − ε) per pixel, with w(t) = 1 − ᾱ_t.

    The result is dL/drgb for `render_backward`; the renderer Jacobian is not
    differentiated through the oracle.
    """
    schedule.check(t)
    x_t = forward_diffuse(rendered.rgb, t, eps, schedule)
    eps_hat = oracle.predict_noise(x_t, t, condition, rel_pose, call_seed=call_seed)
    return ImageBuffer(schedule.weight(t) * (eps_hat.data - eps.data))
