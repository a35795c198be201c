import argparse
import logging
import time
from pathlib import Path
from typing import Dict, List, Optional

from core.cloud_io import load_cloud
from core.gaussians import GaussianCloud
from losses import METRIC_KEYS
from pipeline import HeldOutView, evaluate_views
from scenegen import hair_mask, read_manifest
from utils import utils
from utils.config import RunConfig, add_config_arguments, config_from_args

logger = logging.getLogger(__name__)


def _metric_fields(row: Dict[str, float]) -> str:
    return " ".join(f"{key}={row[key]!r}" for key in METRIC_KEYS)


def format_eval_report(rows: List[Dict[str, float]], indices: List[int], mean: Dict[str, float]) -> str:
    """One `view index=..` line per view, then a `mean` line."""
    lines = [f"view index={index} {_metric_fields(row)}" for index, row in zip(indices, rows)]
    lines.append(f"mean views={len(rows)} {_metric_fields(mean)}")
    return "\n".join(lines) + "\n"


def load_views(manifest: str, hair: Optional[GaussianCloud] = None) -> List[HeldOutView]:
    """
    Manifest views with their hair masks: rendered from `hair` when given,
    otherwise the mask_XXX.png files written next to the images.
    """
    views = []
    for entry in read_manifest(manifest):
        camera = entry.camera()
        mask = hair_mask(hair, camera) if hair is not None else entry.mask()
        if mask is None:
            logger.warning("view %d has no hair mask; its metrics cover the whole image", entry.index)
        views.append(HeldOutView(camera, entry.image(), mask, entry.index, quantized=True))
    return views


def main(cfg: RunConfig, cloud_path: str, manifest: str, hair_path: Optional[str] = None,
         report_path: Optional[str] = None) -> dict:
    """
    Masked l1 / PSNR / perceptual of a cloud over every view of a manifest.

    Args:
        cfg (RunConfig): only `[io] res_dir` and `[run]` naming are used.
        cloud_path (str): cloud to evaluate.
        manifest (str): dataset manifest (or its directory).
        hair_path (str, optional): hair-only GT cloud; its alpha >= 0.5 defines the masks.
        report_path (str, optional): where the key=value report is written.
    """
    print("\n=== eval ===")
    start = time.perf_counter()
    cloud = load_cloud(cloud_path)
    hair = load_cloud(hair_path) if hair_path else None
    views = load_views(manifest, hair)
    rows, mean = evaluate_views(cloud, views)

    text = format_eval_report(rows, [v.index for v in views], mean)
    print(text, end="")
    if report_path:
        Path(report_path).parent.mkdir(parents=True, exist_ok=True)
        Path(report_path).write_text(text)

    result = {"cloud": cloud_path, "manifest": manifest, "views": len(rows), "mean": mean, "rows": rows}
    utils.save_result(result, Path(cfg.io.res_dir) / "eval.json", f"{Path(cloud_path).stem}_{cfg.run.name}",
                      time.perf_counter() - start)
    return result


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Evaluate a cloud against a multi-view dataset.")
    add_config_arguments(parser)
    parser.add_argument("--cloud", required=True)
    parser.add_argument("--manifest", required=True)
    parser.add_argument("--hair", default=None, help="Hair-only GT cloud defining the masks.")
    parser.add_argument("--report", default=None)
    args = parser.parse_args()

    utils.init_logging()
    main(config_from_args(args), args.cloud, args.manifest, args.hair, args.report)
