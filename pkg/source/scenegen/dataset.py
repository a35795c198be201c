"""Multi-view datasets: images, camera files, hair masks and a TSV manifest."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Union

from tqdm import tqdm

from core.camera import Camera, load_camera, save_camera
from core.errors import DatasetError
from core.gaussians import GaussianCloud
from core.image import ImageBuffer, load_png, save_png
from scenegen.cameras import CameraRig, sample_camera
from splat.rasterizer import WHITE, RasterSettings, render

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.tsv"
HAIR_MASK_THRESHOLD = 0.5


@dataclass(frozen=True)
class ManifestEntry:
    index: int
    image_path: Path
    camera_path: Path

    @property
    def mask_path(self) -> Path:
        return self.image_path.with_name(self.image_path.name.replace("view_", "mask_", 1))

    def camera(self) -> Camera:
        return load_camera(self.camera_path)

    def image(self) -> ImageBuffer:
        return load_png(self.image_path)

    def mask(self) -> Optional[ImageBuffer]:
        return load_png(self.mask_path, channels=1) if self.mask_path.exists() else None


def hair_mask(hair: GaussianCloud, camera: Camera, settings: RasterSettings = RasterSettings()) -> ImageBuffer:
    """Alpha of the hair-only cloud thresholded at 0.5."""
    alpha = render(hair, camera, WHITE, settings).alpha.data
    return ImageBuffer((alpha >= HAIR_MASK_THRESHOLD).astype(float))


def dataset_cameras(n_views: int, rig: CameraRig, seed: int, mode: str = "random", start: int = 0) -> List[Camera]:
    """Cameras `start .. start + n_views - 1` of the stream; index 0 is the frontal reference view."""
    return [rig.reference() if index == 0 else sample_camera(seed, index, rig, mode)
            for index in range(start, start + n_views)]


def render_dataset(scene: GaussianCloud, n_views: int, out_dir: Union[str, Path], rig: CameraRig = CameraRig(),
                   seed: int = 0, hair: Optional[GaussianCloud] = None, mode: str = "random",
                   settings: RasterSettings = RasterSettings(), start: int = 0) -> List[ManifestEntry]:
    if n_views < 1:
        raise DatasetError(f"a dataset needs at least one view, got {n_views}")
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DatasetError(f"cannot create dataset directory {out_dir}: {exc.strerror}") from exc

    entries = []
    rows = []
    for index, camera in enumerate(tqdm(dataset_cameras(n_views, rig, seed, mode, start), desc="views", leave=False)):
        image_path = out_dir / f"view_{index:03d}.png"
        camera_path = out_dir / f"view_{index:03d}.cam"
        save_png(render(scene, camera, WHITE, settings).rgb, image_path)
        save_camera(camera, camera_path)
        if hair is not None:
            save_png(hair_mask(hair, camera, settings), out_dir / f"mask_{index:03d}.png")
        entries.append(ManifestEntry(index, image_path, camera_path))
        rows.append(f"{index}\t{image_path.name}\t{camera_path.name}\n")

    (out_dir / MANIFEST_NAME).write_text("".join(rows))
    logger.info("wrote %d views to %s", n_views, out_dir)
    return entries


def read_manifest(path: Union[str, Path]) -> List[ManifestEntry]:
    """Entries of a manifest; relative paths resolve against the manifest's directory."""
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    base = path.parent
    entries = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise DatasetError(f"{path}:{lineno}: expected index<TAB>image<TAB>camera")
        try:
            index = int(parts[0])
        except ValueError as exc:
            raise DatasetError(f"{path}:{lineno}: bad view index {parts[0]!r}") from exc
        entries.append(ManifestEntry(index, base / parts[1], base / parts[2]))
    return entries
