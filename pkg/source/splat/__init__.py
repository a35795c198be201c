"""Differentiable Gaussian splatting: projection, forward compositing and backward pass."""

from splat.gradients import GradientBundle
from splat.projection import Projection, ProjectedGaussian, project
from splat.rasterizer import FULL_EXTENT, RasterSettings, RenderedView, render, render_backward

__all__ = [
    "FULL_EXTENT",
    "GradientBundle",
    "ProjectedGaussian",
    "Projection",
    "RasterSettings",
    "RenderedView",
    "project",
    "render",
    "render_backward",
]
