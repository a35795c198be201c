"""Synthetic strand scenes, hemisphere cameras and dataset rendering."""

from scenegen.cameras import TURNTABLE_AZIMUTHS, CameraRig, sample_camera, turntable
from scenegen.dataset import ManifestEntry, hair_mask, read_manifest, render_dataset
from scenegen.scene import (
    STYLES,
    SceneSpec,
    face_landmarks,
    generate_body,
    generate_hair,
    generate_scene,
)

__all__ = [
    "STYLES",
    "TURNTABLE_AZIMUTHS",
    "CameraRig",
    "ManifestEntry",
    "SceneSpec",
    "face_landmarks",
    "generate_body",
    "generate_hair",
    "generate_scene",
    "hair_mask",
    "read_manifest",
    "render_dataset",
    "sample_camera",
    "turntable",
]
