import argparse
import time
from pathlib import Path
from typing import Dict, List, Optional

from core.cloud_io import load_cloud, save_cloud
from core.errors import DatasetError
from core.gaussians import GaussianCloud
from losses import METRIC_KEYS
from pipeline import coarse_stage, gamma_at, init_cloud, pixelwise_stage, viewwise_stage
from pipeline.report import StageReport
from run_reconstruct import RunSetup, add_input_arguments, inputs_from_args, setup_run
from utils import utils
from utils.config import RunConfig, add_config_arguments, config_from_args

ROW_LABELS = {"l1": "L1", "perceptual": "Perceptual", "psnr_db": "PSNR"}


def format_table(columns: List[str], metrics: Dict[str, List[float]]) -> str:
    """Plain-text table: one header line, then one row per metric."""
    lines = ["metric\t" + "\t".join(columns)]
    for key in ("l1", "perceptual", "psnr_db"):
        lines.append(ROW_LABELS[key] + "\t" + "\t".join(f"{v:.6g}" for v in metrics[key]))
    return "\n".join(lines) + "\n"


def _starting_cloud(cfg: RunConfig, run: RunSetup, theta0: Optional[str]) -> GaussianCloud:
    if theta0:
        return load_cloud(theta0)
    print("=== coarse ===")
    cloud = init_cloud(cfg.init.points, cfg.init.box_half_extent, cfg.seed)
    cloud, _ = coarse_stage(run.image, run.mask, cfg.coarse, run.synthesizer, run.schedule, cfg.seed, run.ctx, cloud)
    return cloud


def _require_held_out(run: RunSetup) -> None:
    if not run.ctx.held_out:
        raise DatasetError("ablations are scored on held-out views (--held-out or a gen directory)")


def _snapshot_metrics(report: StageReport, steps: List[int]) -> Dict[str, List[float]]:
    by_step = {cp.step: cp.values for cp in report.checkpoints}
    return {key: [by_step[s][key] for s in steps] for key in METRIC_KEYS}


def ablate_gamma(cfg: RunConfig, inputs, out_dir: Optional[str] = None, theta0: Optional[str] = None,
                 fixed_gamma: Optional[float] = None) -> dict:
    """
    View-wise stage from one Θ⁰, scored on the held-out views at the end of
    every γ period (the default schedule gives γ = 0.5 / 0.65 / 0.8).

    Args:
        cfg (RunConfig): run configuration; `[viewwise]` sets the γ schedule.
        inputs (ReconstructInputs): as for reconstruct; held-out views are required.
        out_dir (str, optional): where theta0.gs and ablate_gamma.txt go.
        theta0 (str, optional): start from this cloud instead of running the coarse stage.
        fixed_gamma (float, optional): also run a control with γ held at this value.
    """
    print("\n=== ablate-gamma ===")
    start = time.perf_counter()
    out = utils.ensure_dir(out_dir or cfg.io.out_dir)
    run = setup_run(cfg, inputs)
    _require_held_out(run)
    cloud0 = _starting_cloud(cfg, run, theta0)
    save_cloud(cloud0, out / "theta0.gs")

    vcfg = cfg.viewwise.with_overrides(checkpoint_interval=cfg.viewwise.gamma_period)
    steps = list(range(vcfg.gamma_period, vcfg.iters + 1, vcfg.gamma_period))
    columns = [f"γ={gamma_at(s - 1, vcfg):g}" for s in steps]

    print("=== viewwise (scheduled γ) ===")
    _, report = viewwise_stage(cloud0, run.image, vcfg, run.synthesizer, cfg.seed, run.ctx)
    report.save(out / "report_ablate_gamma.txt")
    result = {"steps": steps, "columns": columns, "scheduled": _snapshot_metrics(report, steps)}
    text = format_table(columns, result["scheduled"])

    if fixed_gamma is not None:
        print(f"=== viewwise (fixed γ={fixed_gamma:g}) ===")
        control_cfg = vcfg.with_overrides(fixed_gamma=fixed_gamma)
        _, control = viewwise_stage(cloud0, run.image, control_cfg, run.synthesizer, cfg.seed, run.ctx)
        control.save(out / "report_ablate_gamma_fixed.txt")
        result["fixed_gamma"] = fixed_gamma
        result["control"] = _snapshot_metrics(control, steps)
        text += f"\nfixed γ={fixed_gamma:g}\n" + format_table([f"step={s}" for s in steps], result["control"])

    print(text, end="")
    (out / "ablate_gamma.txt").write_text(text)
    utils.save_result(result, Path(cfg.io.res_dir) / "ablate_gamma.json", f"{cfg.run.name}_seed{cfg.seed}",
                      time.perf_counter() - start)
    return result


PERCEPTUAL_COLUMNS = ["Θ¹ w/o p", "Θ¹ w/ p", "Θ² w/o p", "Θ² w/ p"]


def ablate_perceptual(cfg: RunConfig, inputs, out_dir: Optional[str] = None, theta0: Optional[str] = None) -> dict:
    """
    View-wise then pixel-wise refinement from one Θ⁰, once without the
    perceptual term (β = 0) and once with the configured β.
    """
    print("\n=== ablate-perceptual ===")
    start = time.perf_counter()
    out = utils.ensure_dir(out_dir or cfg.io.out_dir)
    run = setup_run(cfg, inputs)
    _require_held_out(run)
    cloud0 = _starting_cloud(cfg, run, theta0)
    save_cloud(cloud0, out / "theta0.gs")

    finals = {}
    betas = {"without": 0.0, "with": cfg.viewwise.beta}
    for label, beta in betas.items():
        print(f"=== refinement {label} perceptual (β={beta:g}) ===")
        theta1, r1 = viewwise_stage(cloud0, run.image, cfg.viewwise.with_overrides(beta=beta), run.synthesizer,
                                    cfg.seed, run.ctx)
        _, r2 = pixelwise_stage(theta1, cfg.pixelwise.with_overrides(beta=beta), run.enhancer, cfg.seed, run.ctx)
        finals[label] = (r1.last().values, r2.last().values)

    order = [finals["without"][0], finals["with"][0], finals["without"][1], finals["with"][1]]
    metrics = {key: [values[key] for values in order] for key in METRIC_KEYS}
    text = format_table(PERCEPTUAL_COLUMNS, metrics)
    print(text, end="")
    (out / "ablate_perceptual.txt").write_text(text)

    result = {"columns": PERCEPTUAL_COLUMNS, "beta": cfg.viewwise.beta, "metrics": metrics}
    utils.save_result(result, Path(cfg.io.res_dir) / "ablate_perceptual.json", f"{cfg.run.name}_seed{cfg.seed}",
                      time.perf_counter() - start)
    return result


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="γ-schedule and perceptual-term ablations.")
    parser.add_argument("which", choices=["gamma", "perceptual"])
    add_config_arguments(parser)
    add_input_arguments(parser)
    parser.add_argument("--out", default=None)
    parser.add_argument("--theta0", default=None, help="Start from this coarse cloud.")
    parser.add_argument("--fixed-gamma", type=float, default=None)
    args = parser.parse_args()

    utils.init_logging()
    cfg = config_from_args(args)
    if args.which == "gamma":
        ablate_gamma(cfg, inputs_from_args(args), args.out, args.theta0, args.fixed_gamma)
    else:
        ablate_perceptual(cfg, inputs_from_args(args), args.out, args.theta0)
