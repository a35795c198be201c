"""Perspective projection of 3D Gaussians to screen-space ellipses (EWA).

cov2d = J W Σ Wᵀ Jᵀ + 0.3·I, with J the Jacobian of the perspective map at the
Gaussian's camera-space centre and W the world-to-camera rotation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from core.camera import Camera
from core.gaussians import GaussianCloud, covariance_from_params, normalize_quaternions, quaternion_to_matrix

logger = logging.getLogger(__name__)

LOW_PASS = 0.3
NEAR_PLANE = 0.01
FOOTPRINT_SIGMA = 3.0
SINGULAR_DET = 1e-12


@dataclass(frozen=True)
class ProjectedGaussian:
    mean2d: np.ndarray
    cov2d: np.ndarray
    depth: float
    effective_opacity_base: float


@dataclass
class Projection:
    """Per-primitive projection results plus the intermediates the backward pass reuses."""

    means2d: np.ndarray         # (N, 2) pixels
    cov2d: np.ndarray           # (N, 2, 2) pixels²
    conics: np.ndarray          # (N, 3) inverse cov2d entries (a, b, c)
    depths: np.ndarray          # (N,) camera-space z
    opacities: np.ndarray       # (N,)
    colors: np.ndarray          # (N, 3) clamped
    visible: np.ndarray         # (N,) bool
    sigma_max: np.ndarray       # (N,) sqrt of the largest cov2d eigenvalue
    cam_points: np.ndarray      # (N, 3)
    jacobians: np.ndarray       # (N, 2, 3)
    rot_world: np.ndarray       # (3, 3) world-to-camera rotation
    rotations: np.ndarray       # (N, 3, 3) primitive rotations
    unit_quats: np.ndarray      # (N, 4)
    scales: np.ndarray          # (N, 3)
    cov3d: np.ndarray           # (N, 3, 3)
    culled_near: int = 0
    culled_offscreen: int = 0
    singular: int = 0

    def __len__(self) -> int:
        return len(self.depths)

    def __getitem__(self, i: int) -> ProjectedGaussian:
        return ProjectedGaussian(self.means2d[i].copy(), self.cov2d[i].copy(), float(self.depths[i]),
                                 float(self.opacities[i]))

    def visible_indices(self) -> np.ndarray:
        return np.flatnonzero(self.visible)

    def depth_order(self) -> np.ndarray:
        """Visible primitives front to back.

        Ties in depth are broken by the primitive's own parameters so the order
        does not depend on its position in the list.
        """
        idx = self.visible_indices()
        keys = (
            self.colors[idx, 2], self.colors[idx, 1], self.colors[idx, 0],
            self.opacities[idx], self.means2d[idx, 1], self.means2d[idx, 0],
            self.cam_points[idx, 1], self.cam_points[idx, 0], self.depths[idx],
        )
        return idx[np.lexsort(keys)]


def project(cloud: GaussianCloud, camera: Camera) -> Projection:
    n = len(cloud)
    W_rot, t_cam = camera.extrinsics()
    fx = fy = camera.focal
    cx, cy = camera.principal_point

    cam_points = cloud.centers @ W_rot.T + t_cam
    tz = cam_points[:, 2]
    in_front = tz > NEAR_PLANE
    z = np.where(in_front, tz, 1.0)
    tx, ty = cam_points[:, 0], cam_points[:, 1]

    means2d = np.stack([fx * tx / z + cx, fy * ty / z + cy], axis=1)

    J = np.zeros((n, 2, 3))
    J[:, 0, 0] = fx / z
    J[:, 0, 2] = -fx * tx / (z * z)
    J[:, 1, 1] = fy / z
    J[:, 1, 2] = -fy * ty / (z * z)

    unit_quats = normalize_quaternions(cloud.rotations) if n else np.zeros((0, 4))
    rotations = quaternion_to_matrix(unit_quats) if n else np.zeros((0, 3, 3))
    scales = cloud.scales
    cov3d = covariance_from_params(cloud.log_scales, unit_quats) if n else np.zeros((0, 3, 3))

    M = J @ W_rot
    cov2d = M @ cov3d @ np.transpose(M, (0, 2, 1)) + LOW_PASS * np.eye(2)
    det = cov2d[:, 0, 0] * cov2d[:, 1, 1] - cov2d[:, 0, 1] * cov2d[:, 1, 0]
    nonsingular = det >= SINGULAR_DET
    safe_det = np.where(nonsingular, det, 1.0)
    conics = np.stack([cov2d[:, 1, 1] / safe_det, -cov2d[:, 0, 1] / safe_det, cov2d[:, 0, 0] / safe_det], axis=1)

    mid = 0.5 * (cov2d[:, 0, 0] + cov2d[:, 1, 1])
    lam_max = mid + np.sqrt(np.maximum(mid * mid - det, 0.0))
    sigma_max = np.sqrt(np.maximum(lam_max, 0.0))
    reach = FOOTPRINT_SIGMA * sigma_max
    on_screen = ((means2d[:, 0] + reach > 0) & (means2d[:, 0] - reach < camera.image_width)
                 & (means2d[:, 1] + reach > 0) & (means2d[:, 1] - reach < camera.image_height))

    visible = in_front & on_screen & nonsingular
    projection = Projection(
        means2d=means2d, cov2d=cov2d, conics=conics, depths=tz, opacities=cloud.opacities,
        colors=cloud.rgb, visible=visible, sigma_max=sigma_max, cam_points=cam_points,
        jacobians=J, rot_world=W_rot, rotations=rotations, unit_quats=unit_quats,
        scales=scales, cov3d=cov3d,
        culled_near=int((~in_front).sum()),
        culled_offscreen=int((in_front & ~on_screen).sum()),
        singular=int((in_front & on_screen & ~nonsingular).sum()),
    )
    if projection.singular:
        logger.debug("skipped %d primitive(s) with singular screen covariance", projection.singular)
    return projection
