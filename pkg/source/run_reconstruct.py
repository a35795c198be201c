import argparse
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from core.cloud_io import load_cloud, save_cloud
from core.errors import ConfigError, StageAborted
from core.gaussians import GaussianCloud
from core.image import ImageBuffer, hstack, load_png, save_png
from pipeline import (
    HeldOutView,
    StageContext,
    align_landmarks,
    coarse_stage,
    compose_aligned_image,
    compose_aligned_mask,
    init_cloud,
    load_landmarks,
    pad_and_resize,
    pixelwise_stage,
    resize_landmarks,
    viewwise_stage,
)
from pipeline.report import StageReport
from priors import EnhancerOracle, NoiseSchedule, SynthesizerOracle, build_oracles
from scenegen import read_manifest, turntable
from scenegen.cameras import CameraRig
from splat.rasterizer import WHITE, render
from utils import utils
from utils.config import STAGES, RunConfig, add_config_arguments, config_from_args

logger = logging.getLogger(__name__)

THETA_FILES = {"coarse": "theta0.gs", "viewwise": "theta1.gs", "pixelwise": "theta2.gs"}


@dataclass(frozen=True)
class ReconstructInputs:
    image: str
    mask: str
    landmarks_h: str
    landmarks_b: str
    body_image: str
    body_mask: str
    gt_scene: Optional[str] = None
    held_out: Optional[str] = None

    @classmethod
    def from_dataset(cls, data_dir: str) -> "ReconstructInputs":
        """Inputs taken from a `gen` output directory: its reference view over its template body."""
        d = Path(data_dir)
        held_out = d / "held_out" / "manifest.tsv"
        return cls(
            image=str(d / "view_000.png"),
            mask=str(d / "mask_000.png"),
            landmarks_h=str(d / "landmarks.txt"),
            landmarks_b=str(d / "landmarks.txt"),
            body_image=str(d / "body.png"),
            body_mask=str(d / "body_mask.png"),
            gt_scene=str(d / "scene.gs") if (d / "scene.gs").exists() else None,
            held_out=str(held_out) if held_out.exists() else None,
        )


def prepare_reference(inputs: ReconstructInputs, size: int) -> Tuple[ImageBuffer, ImageBuffer, float]:
    """Aligned reference image I_a, its mask M_a and the landmark RMSE in pixels."""
    hair = load_png(inputs.image)
    hair_mask = load_png(inputs.mask, channels=1)
    body = load_png(inputs.body_image)
    body_alpha = load_png(inputs.body_mask, channels=1)
    lmk_h = resize_landmarks(load_landmarks(inputs.landmarks_h), hair.shape[:2], size)
    lmk_b = resize_landmarks(load_landmarks(inputs.landmarks_b), body.shape[:2], size)

    hair = pad_and_resize(hair, size, WHITE)
    hair_mask = pad_and_resize(hair_mask, size, (0.0, 0.0, 0.0))
    body = pad_and_resize(body, size, WHITE)
    body_alpha = pad_and_resize(body_alpha, size, (0.0, 0.0, 0.0))

    xf, rmse = align_landmarks(lmk_h, lmk_b)
    image = compose_aligned_image(hair, hair_mask, body, xf)
    mask = compose_aligned_mask(hair_mask, body_alpha, xf)
    return image, mask, rmse


def load_held_out(manifest: Optional[str]) -> List[HeldOutView]:
    if manifest is None:
        return []
    return [HeldOutView(entry.camera(), entry.image(), entry.mask(), entry.index, quantized=True)
            for entry in read_manifest(manifest)]


def turntable_strip(cloud: GaussianCloud, rig: CameraRig) -> ImageBuffer:
    """Seven renders around the head, left to right."""
    return hstack([render(cloud, camera, WHITE).rgb for camera in turntable(rig)])


@dataclass
class RunSetup:
    """Aligned reference, oracles and stage context shared by reconstruct and the ablations."""

    image: ImageBuffer
    mask: ImageBuffer
    rmse: float
    synthesizer: SynthesizerOracle
    enhancer: EnhancerOracle
    schedule: NoiseSchedule
    ctx: StageContext


def setup_run(cfg: RunConfig, inputs: ReconstructInputs) -> RunSetup:
    rig = cfg.rig()
    reference = rig.reference()
    image, mask, rmse = prepare_reference(inputs, cfg.io.resolution)
    gt = load_cloud(inputs.gt_scene) if inputs.gt_scene else None
    p = cfg.prior
    schedule = p.schedule()
    synthesizer, enhancer = build_oracles(p.kind, gt, reference, p.blur_sigma, p.jitter_sigma, p.seed,
                                          p.blind_sigma, p.unsharp_amount, p.unsharp_sigma, schedule)
    ctx = StageContext(reference_camera=reference, rig=rig, image=image, mask=mask,
                       held_out=load_held_out(inputs.held_out))
    logger.info("prior=%s, %d held-out views", p.kind, len(ctx.held_out))
    return RunSetup(image, mask, rmse, synthesizer, enhancer, schedule, ctx)


def stage_summary(report: StageReport) -> Dict:
    last = report.last()
    return {"count": report.final_count, "densify_events": len(report.events),
            "metrics": dict(last.values), "time": round(report.wall_clock, 3)}


def main(cfg: RunConfig, inputs: ReconstructInputs, out_dir: Optional[str] = None,
         stop_after: Optional[str] = None) -> dict:
    """
    Reconstruct the hair of one image as a Gaussian cloud: align, compose, then
    coarse -> view-wise -> pixel-wise.

    Args:
        cfg (RunConfig): run configuration.
        inputs (ReconstructInputs): image, masks, landmarks, body template and optional GT/held-out paths.
        out_dir (str, optional): where thetaK.gs and report_<stage>.txt go (default `[io] out_dir`).
        stop_after (str, optional): last stage to run (coarse, viewwise or pixelwise).
    """
    if stop_after is not None and stop_after not in STAGES:
        raise ConfigError(f"--stop-after must be one of {', '.join(STAGES)}")
    print("\n=== reconstruct ===")
    start = time.perf_counter()
    out = utils.ensure_dir(out_dir or cfg.io.out_dir)
    run = setup_run(cfg, inputs)
    image, mask, schedule, ctx = run.image, run.mask, run.schedule, run.ctx
    synthesizer, enhancer = run.synthesizer, run.enhancer
    save_png(image, out / "aligned.png")
    save_png(mask, out / "aligned_mask.png")
    print(f"Aligned input (landmark rmse {run.rmse:.3g} px)")

    cloud = init_cloud(cfg.init.points, cfg.init.box_half_extent, cfg.seed)
    runners = {
        "coarse": lambda c: coarse_stage(image, mask, cfg.coarse, synthesizer, schedule, cfg.seed, ctx, c),
        "viewwise": lambda c: viewwise_stage(c, image, cfg.viewwise, synthesizer, cfg.seed, ctx),
        "pixelwise": lambda c: pixelwise_stage(c, cfg.pixelwise, enhancer, cfg.seed, ctx),
    }

    result = {"alignment_rmse": run.rmse, "prior": cfg.prior.kind, "resolution": cfg.io.resolution, "stages": {}}
    for name in STAGES:
        print(f"=== {name} ===")
        try:
            cloud, report = runners[name](cloud)
        except StageAborted as exc:
            if exc.report is not None:
                exc.report.save(out / f"report_{name}.txt")
            raise
        save_cloud(cloud, out / THETA_FILES[name])
        report.save(out / f"report_{name}.txt")
        result["stages"][name] = stage_summary(report)
        print(f"{THETA_FILES[name]}: {report.final_count} primitives")
        if name == stop_after:
            break

    save_png(turntable_strip(cloud, ctx.rig), out / "turntable.png")
    result["out_dir"] = str(out)
    utils.save_result(result, Path(cfg.io.res_dir) / "reconstruct.json", f"{cfg.run.name}_seed{cfg.seed}",
                      time.perf_counter() - start)
    return result


def add_input_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", default=None, help="A `gen` output directory supplying every input below.")
    parser.add_argument("--image", default=None, help="Input hair image I_h.")
    parser.add_argument("--mask", default=None, help="Hair mask of the input image.")
    parser.add_argument("--landmarks-h", default=None, help="68 face landmarks of the input image.")
    parser.add_argument("--landmarks-b", default=None, help="68 face landmarks of the template body image.")
    parser.add_argument("--body-image", default=None, help="Template body render I_b.")
    parser.add_argument("--body-mask", default=None, help="Alpha mask of the template body render.")
    parser.add_argument("--gt-scene", default=None, help="Ground-truth cloud for the gt prior.")
    parser.add_argument("--held-out", default=None, help="Held-out manifest evaluated at checkpoints.")


def inputs_from_args(args) -> ReconstructInputs:
    base = ReconstructInputs.from_dataset(args.data) if args.data else None
    values = {}
    for key in ("image", "mask", "landmarks_h", "landmarks_b", "body_image", "body_mask", "gt_scene", "held_out"):
        given = getattr(args, key)
        values[key] = given if given is not None else (getattr(base, key) if base else None)
    missing = [k for k in ("image", "mask", "landmarks_h", "landmarks_b", "body_image", "body_mask") if not values[k]]
    if missing:
        raise ConfigError("missing inputs: " + ", ".join("--" + k.replace("_", "-") for k in missing))
    return ReconstructInputs(**values)


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Reconstruct 3D Gaussian hair from one image.")
    add_config_arguments(parser)
    add_input_arguments(parser)
    parser.add_argument("--out", default=None, help="Output directory.")
    parser.add_argument("--stop-after", choices=STAGES, default=None)
    args = parser.parse_args()

    utils.init_logging()
    main(config_from_args(args), inputs_from_args(args), args.out, args.stop_after)
