"""Foundational types: Gaussians, cameras, images, transforms and their file formats."""

from core.camera import Camera, RelativePose, focal_from_mm, load_camera, save_camera
from core.cloud_io import load_cloud, save_cloud
from core.gaussians import (
    GaussianCloud,
    GaussianPrimitive,
    covariance_3d,
    covariance_from_params,
    quaternion_to_matrix,
)
from core.image import ImageBuffer, load_png, save_png
from core.transforms import SimilarityTransform2D

__all__ = [
    "Camera",
    "GaussianCloud",
    "GaussianPrimitive",
    "ImageBuffer",
    "RelativePose",
    "SimilarityTransform2D",
    "covariance_3d",
    "covariance_from_params",
    "focal_from_mm",
    "load_camera",
    "load_cloud",
    "load_png",
    "quaternion_to_matrix",
    "save_camera",
    "save_cloud",
    "save_png",
]
