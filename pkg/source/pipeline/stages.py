"""The three optimization stages: coarse (SDS), view-wise and pixel-wise refinement.

All stages share one loop: each step renders `batch_views` random hemisphere
views, asks the stage for an upstream image gradient per view, optionally adds
reference-view supervision, sums the backward passes and takes one optimizer
step. Densify/prune runs every `densify_interval` steps and metrics over the
held-out views are recorded every `checkpoint_interval` steps.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from core.camera import Camera
from core.errors import DatasetError, GsliftError, StageAborted
from core.gaussians import GaussianCloud
from core.image import ImageBuffer
from losses import l1_with_grad, perceptual, reference_loss, sds_grad
from pipeline.config import StageConfig, gamma_at
from pipeline.density import densify_and_prune
from pipeline.evaluate import HeldOutView, evaluate_views
from pipeline.initialize import DEFAULT_BOX, DEFAULT_POINTS, init_cloud
from pipeline.optimizer import CloudOptimizer
from pipeline.report import StageReport
from priors.oracles import EnhanceContext, EnhancerOracle, SynthesizerOracle
from priors.schedule import NoiseSchedule, sample_noise
from scenegen.cameras import CameraRig, sample_camera
from splat.gradients import GradientBundle
from splat.rasterizer import WHITE, RasterSettings, RenderedView, render, render_backward

logger = logging.getLogger(__name__)

STAGE_STREAMS = {"coarse": 0, "viewwise": 1, "pixelwise": 2}

# (step, call_seed, camera, rendered view, rng) -> (loss value, dL/drgb)
ViewLoss = Callable[[int, int, Camera, RenderedView, np.random.Generator], Tuple[float, ImageBuffer]]


@dataclass
class StageContext:
    """Everything a stage needs besides its own config and oracle."""

    reference_camera: Camera
    rig: CameraRig
    image: Optional[ImageBuffer] = None      # aligned input I_a
    mask: Optional[ImageBuffer] = None       # aligned mask M_a
    held_out: Sequence[HeldOutView] = field(default_factory=tuple)
    background: tuple = WHITE
    settings: RasterSettings = field(default_factory=RasterSettings)
    progress: bool = True


def _image_loss(rendered: ImageBuffer, target: ImageBuffer, beta: float) -> Tuple[float, ImageBuffer]:
    """l1 + β·perceptual and its gradient with respect to `rendered`."""
    loss = l1_with_grad(rendered, target)
    if beta <= 0.0:
        return loss.value, loss.d_rgb
    p = perceptual(rendered, target)
    return loss.value + beta * p.value, ImageBuffer(loss.d_rgb.data + beta * p.d_rgb.data)


def _run_stage(name: str, cloud: GaussianCloud, cfg: StageConfig, seed: int, ctx: StageContext,
               view_loss: ViewLoss) -> Tuple[GaussianCloud, StageReport]:
    cloud = cloud.copy()
    cloud.reset_stats()
    rng = np.random.default_rng([int(seed), STAGE_STREAMS.get(name, 3)])
    pose_seed = int(rng.integers(2 ** 31))
    optimizer = CloudOptimizer(cfg, len(cloud))
    report = StageReport(stage=name, iters=cfg.iters)
    use_reference = cfg.ref_view_weight > 0.0 and ctx.image is not None
    if cfg.ref_view_weight > 0.0 and ctx.image is not None and ctx.mask is None:
        raise DatasetError(f"{name}: reference supervision needs the aligned mask")
    started = time.perf_counter()

    def checkpoint(step: int, losses) -> None:
        values = dict(losses)
        if ctx.held_out:
            values.update(evaluate_views(cloud, ctx.held_out, ctx.background, ctx.settings)[1])
        report.add_checkpoint(step, len(cloud), values)
        logger.info("%s step %d: %d primitives %s", name, step, len(cloud),
                    " ".join(f"{k}={v:.4g}" for k, v in values.items()))

    checkpoint(0, {})
    for step in tqdm(range(cfg.iters), desc=name, disable=None if ctx.progress else True, leave=False):
        grads = GradientBundle.zeros(len(cloud))
        loss_view = 0.0
        for v in range(cfg.batch_views):
            call_seed = step * cfg.batch_views + v
            camera = sample_camera(pose_seed, call_seed, ctx.rig)
            view = render(cloud, camera, ctx.background, ctx.settings)
            try:
                value, d_rgb = view_loss(step, call_seed, camera, view, rng)
            except StageAborted:
                raise
            except GsliftError as exc:
                report.final_count = len(cloud)
                report.wall_clock = time.perf_counter() - started
                raise StageAborted(f"{name} stage aborted at step {step}: {exc.detail}", report) from exc
            g = render_backward(cloud, camera, d_rgb, None, ctx.background, ctx.settings)
            cloud.accumulate_stats(g.mean2d_norm, g.center, g.seen)
            grads = grads + g
            loss_view += value / cfg.batch_views

        loss_ref = 0.0
        if use_reference:
            view = render(cloud, ctx.reference_camera, ctx.background, ctx.settings)
            ref = reference_loss(view, ctx.image, ctx.mask)
            g = render_backward(cloud, ctx.reference_camera, ref.d_rgb, ref.d_alpha,
                                ctx.background, ctx.settings).scaled(cfg.ref_view_weight)
            cloud.accumulate_stats(g.mean2d_norm, g.center, g.seen)
            grads = grads + g
            loss_ref = ref.value

        optimizer.step(cloud, grads, step)
        done = step + 1
        if done % cfg.densify_interval == 0 and done < cfg.iters:
            cloud, event, origin = densify_and_prune(cloud, cfg, done)
            optimizer.remap(origin)
            report.events.append(event)
        if done % cfg.checkpoint_interval == 0 or done == cfg.iters:
            checkpoint(done, {"loss_view": loss_view, "loss_ref": loss_ref})

    report.final_count = len(cloud)
    report.wall_clock = time.perf_counter() - started
    return cloud, report


def coarse_stage(image: ImageBuffer, mask: ImageBuffer, cfg: StageConfig, synthesizer: SynthesizerOracle,
                 schedule: NoiseSchedule, seed: int, ctx: StageContext,
                 cloud: Optional[GaussianCloud] = None) -> Tuple[GaussianCloud, StageReport]:
    """SDS against the synthesizer from random poses plus reference-view L1 (Θ → Θ⁰)."""
    if cloud is None:
        cloud = init_cloud(DEFAULT_POINTS, DEFAULT_BOX, seed)
    ctx = replace(ctx, image=image, mask=mask)
    reference = ctx.reference_camera

    def sds_loss(step, call_seed, camera, view, rng):
        t = schedule.sample_timestep(rng)
        eps = sample_noise(view.rgb.shape, rng)
        grad = sds_grad(view, image, camera.relative_to(reference), t, eps, synthesizer, schedule, call_seed)
        return float(np.abs(grad.data).mean()), ImageBuffer(grad.data * (cfg.sds_weight / grad.data.size))

    return _run_stage("coarse", cloud, cfg, seed, ctx, sds_loss)


def viewwise_stage(cloud: GaussianCloud, image: ImageBuffer, cfg: StageConfig, synthesizer: SynthesizerOracle,
                   seed: int, ctx: StageContext, mask: Optional[ImageBuffer] = None) -> Tuple[GaussianCloud, StageReport]:
    """Fit renders to the synthesizer's refinement of γ-blended renders (Θ⁰ → Θ¹)."""
    ctx = replace(ctx, image=image, mask=mask if mask is not None else ctx.mask)
    reference = ctx.reference_camera

    def refine_loss(step, call_seed, camera, view, rng):
        gamma = gamma_at(step, cfg)
        noise = rng.standard_normal(view.rgb.shape)
        blend = ImageBuffer(gamma * view.rgb.data + (1.0 - gamma) * noise)
        target = synthesizer.synthesize(blend, gamma, image, camera.relative_to(reference), call_seed)
        return _image_loss(view.rgb, target, cfg.beta)

    return _run_stage("viewwise", cloud, cfg, seed, ctx, refine_loss)


def pixelwise_stage(cloud: GaussianCloud, cfg: StageConfig, enhancer: EnhancerOracle, seed: int,
                    ctx: StageContext) -> Tuple[GaussianCloud, StageReport]:
    """Fit renders to the enhancer's detail-enhanced versions of themselves (Θ¹ → Θ²)."""

    def enhance_loss(step, call_seed, camera, view, rng):
        target = enhancer.enhance(view.rgb, EnhanceContext(camera))
        return _image_loss(view.rgb, target, cfg.beta)

    return _run_stage("pixelwise", cloud, cfg, seed, ctx, enhance_loss)
