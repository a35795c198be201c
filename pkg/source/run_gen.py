import argparse
import time
from pathlib import Path
from typing import Optional

from core.cloud_io import quantize, save_cloud
from core.gaussians import GaussianCloud
from core.image import ImageBuffer, save_png
from pipeline.preprocess import save_landmarks
from scenegen import face_landmarks, generate_body, generate_hair, render_dataset
from scenegen.dataset import MANIFEST_NAME
from splat.rasterizer import WHITE, render
from utils import utils
from utils.config import RunConfig, add_config_arguments, config_from_args

HELD_OUT_DIR = "held_out"
# held-out cameras come from the same stream, far past any training index
HELD_OUT_START = 100_000


def main(cfg: RunConfig, out_dir: Optional[str] = None, views: Optional[int] = None) -> dict:
    """
    Generate a synthetic hair scene and render its multi-view dataset.

    Args:
        cfg (RunConfig): scene, camera and io settings; `[run] seed` seeds the scene and cameras.
        out_dir (str, optional): dataset directory (default `[io] out_dir`).
        views (int, optional): number of training views (default `[io] views`).

    Writes view_XXX.png/.cam, mask_XXX.png and manifest.tsv, the clouds scene.gs,
    hair.gs and body.gs, the template body render body.png/body_mask.png,
    landmarks.txt for the reference view and a held_out/ dataset.
    """
    print("\n=== gen ===")
    start = time.perf_counter()
    out = Path(out_dir or cfg.io.out_dir)
    n_views = cfg.io.views if views is None else views
    spec = cfg.scene_spec()
    rig = cfg.rig()

    # rendered as stored, so scene.gs reproduces the dataset exactly
    hair = quantize(generate_hair(spec))
    body = quantize(generate_body(spec))
    scene = GaussianCloud.concatenate([hair, body])
    print(f"Scene style={spec.style} seed={spec.seed}: {len(hair)} hair + {len(body)} body primitives")

    render_dataset(scene, n_views, out, rig, cfg.seed, hair, cfg.io.view_mode)
    if cfg.io.held_out_views > 0:
        render_dataset(scene, cfg.io.held_out_views, out / HELD_OUT_DIR, rig, cfg.seed, hair, "random",
                       start=HELD_OUT_START)

    save_cloud(scene, out / "scene.gs")
    save_cloud(hair, out / "hair.gs")
    save_cloud(body, out / "body.gs")

    reference = rig.reference()
    body_view = render(body, reference, WHITE)
    save_png(body_view.rgb, out / "body.png")
    save_png(ImageBuffer(body_view.alpha.data), out / "body_mask.png")
    save_landmarks(face_landmarks(spec, reference), out / "landmarks.txt")

    manifest = out / MANIFEST_NAME
    print(f"Manifest: {manifest}")
    result = {
        "manifest": str(manifest),
        "views": n_views,
        "held_out_views": cfg.io.held_out_views,
        "style": spec.style,
        "hair_primitives": len(hair),
        "body_primitives": len(body),
    }
    utils.save_result(result, Path(cfg.io.res_dir) / "gen.json", f"{cfg.run.name}_seed{cfg.seed}",
                      time.perf_counter() - start)
    return result


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Generate a synthetic hair dataset.")
    add_config_arguments(parser)
    parser.add_argument("--out", default=None, help="Dataset directory.")
    parser.add_argument("--views", type=int, default=None, help="Number of training views.")
    args = parser.parse_args()

    utils.init_logging()
    main(config_from_args(args), args.out, args.views)
