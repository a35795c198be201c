"""
main.py
========
Single command-line entry point of gslift.

Commands:
---------
    gen                 generate a synthetic hair scene and its multi-view dataset
    reconstruct         image -> Θ⁰ (coarse) -> Θ¹ (view-wise) -> Θ² (pixel-wise)
    eval                masked metrics of a cloud over a dataset manifest
    ablate-gamma        view-wise stage scored at the end of each γ period
    ablate-perceptual   refinement without and with the perceptual term
    check               validate the stage reports and clouds of a run directory

Every command reads the same INI configuration (`--config`, `--set
section.key=value`, `--seed`) and is implemented by a `run_<command>.py`
module exposing a programmatic `main(...)`.

On failure one line `error:<category>:<detail>` goes to stderr and the exit
status is 1.
"""

import argparse
import sys

from core.errors import GsliftError
from report_checker import check_results, check_run
from run_ablate import ablate_gamma, ablate_perceptual
from run_eval import main as run_eval_main
from run_gen import main as run_gen_main
from run_reconstruct import add_input_arguments, inputs_from_args
from run_reconstruct import main as run_reconstruct_main
from utils import utils
from utils.config import STAGES, add_config_arguments, config_from_args


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gslift", description="Single-view 3D Gaussian hair reconstruction.")
    parser.add_argument("--verbose", action="store_true", help="Debug logging.")
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("gen", help="Generate a synthetic dataset.")
    add_config_arguments(gen)
    gen.add_argument("--out", default=None, help="Dataset directory (default [io] out_dir).")
    gen.add_argument("--views", type=int, default=None, help="Training views (default [io] views).")

    rec = commands.add_parser("reconstruct", help="Reconstruct hair from one image.")
    add_config_arguments(rec)
    add_input_arguments(rec)
    rec.add_argument("--out", default=None, help="Run directory (default [io] out_dir).")
    rec.add_argument("--stop-after", choices=STAGES, default=None)

    ev = commands.add_parser("eval", help="Evaluate a cloud over a dataset manifest.")
    add_config_arguments(ev)
    ev.add_argument("--cloud", required=True)
    ev.add_argument("--manifest", required=True)
    ev.add_argument("--hair", default=None, help="Hair-only GT cloud; its alpha >= 0.5 is the mask.")
    ev.add_argument("--report", default=None, help="Write the key=value report here too.")

    for name in ("ablate-gamma", "ablate-perceptual"):
        ab = commands.add_parser(name, help=f"{name.split('-')[1]} ablation.")
        add_config_arguments(ab)
        add_input_arguments(ab)
        ab.add_argument("--out", default=None)
        ab.add_argument("--theta0", default=None, help="Start from this coarse cloud.")
        if name == "ablate-gamma":
            ab.add_argument("--fixed-gamma", type=float, default=None, help="Also run a fixed-γ control.")

    chk = commands.add_parser("check", help="Validate reports and clouds of a run directory.")
    chk.add_argument("run_dir")
    chk.add_argument("--res-dir", default=None, help="Also apply the calibration gates to the JSON results here.")
    return parser


def run(args) -> int:
    if args.command == "check":
        print(f"\n=== Checking {args.run_dir} ===")
        valid = check_run(args.run_dir)
        if args.res_dir:
            print(f"\n=== Checking results in {args.res_dir} ===")
            valid &= check_results(args.res_dir)
        return 0 if valid else 1

    cfg = config_from_args(args)
    if args.command == "gen":
        run_gen_main(cfg, args.out, args.views)
    elif args.command == "reconstruct":
        run_reconstruct_main(cfg, inputs_from_args(args), args.out, args.stop_after)
    elif args.command == "eval":
        run_eval_main(cfg, args.cloud, args.manifest, args.hair, args.report)
    elif args.command == "ablate-gamma":
        ablate_gamma(cfg, inputs_from_args(args), args.out, args.theta0, args.fixed_gamma)
    elif args.command == "ablate-perceptual":
        ablate_perceptual(cfg, inputs_from_args(args), args.out, args.theta0)
    return 0


def _one_line(text: str) -> str:
    return " ".join(str(text).split())


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    utils.init_logging(args.verbose)
    try:
        return run(args)
    except GsliftError as exc:
        print(f"error:{exc.category}:{_one_line(exc.detail)}", file=sys.stderr)
    except OSError as exc:
        detail = f"{exc.strerror or exc}: {exc.filename}" if exc.filename else str(exc)
        print(f"error:io:{_one_line(detail)}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
