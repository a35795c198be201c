import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from core.camera import Camera
from core.errors import DimensionError
from core.gaussians import GaussianCloud
from core.image import ImageBuffer
from splat import FULL_EXTENT, RasterSettings, project, render, render_backward
from splat.projection import LOW_PASS
from splat.rasterizer import MAX_ALPHA

from conftest import random_cloud, single_primitive

RED, GREEN = (1.0, 0.0, 0.0), (0.0, 1.0, 0.0)


def params(cloud: GaussianCloud) -> np.ndarray:
    return np.concatenate([cloud.centers, cloud.log_scales, cloud.rotations,
                           cloud.opacity_logits[:, None], cloud.colors], axis=1)


def with_params(flat: np.ndarray) -> GaussianCloud:
    return GaussianCloud(centers=flat[:, 0:3], log_scales=flat[:, 3:6], rotations=flat[:, 6:10],
                         opacity_logits=flat[:, 10], colors=flat[:, 11:14])


def on_pixel_center(depth: float, color, opacity: float = 0.5, scale: float = 0.05) -> GaussianCloud:
    """A primitive whose mean lands on pixel (16, 16) of `small_camera` at the given depth."""
    offset = 0.5 / 40.0 * depth
    return single_primitive(center=(offset, -offset, 1.0 - depth), scale=scale, opacity=opacity, color=color)


class TestProjection:

    def test_on_axis_primitive_lands_on_principal_point(self, small_camera):
        proj = project(single_primitive(), small_camera)
        np.testing.assert_allclose(proj.means2d[0], [16.0, 16.0], atol=1e-12)
        assert proj.depths[0] == pytest.approx(1.0)
        assert proj.visible[0]

    def test_isotropic_footprint(self, small_camera):
        proj = project(single_primitive(scale=0.05), small_camera)
        expected = (40.0 * 0.05) ** 2 + LOW_PASS
        np.testing.assert_allclose(proj.cov2d[0], expected * np.eye(2), atol=1e-9)

    def test_behind_camera_is_culled(self, small_camera):
        proj = project(single_primitive(center=(0.0, 0.0, 2.0)), small_camera)
        assert not proj.visible[0]
        assert proj.culled_near == 1

    def test_screen_covariance_is_positive_definite(self, tiny_camera):
        proj = project(random_cloud(50, seed=4), tiny_camera)
        eig = np.linalg.eigvalsh(proj.cov2d[proj.visible])
        assert np.all(eig >= LOW_PASS - 1e-9)


class TestRender:

    def test_empty_cloud_is_background(self, small_camera):
        view = render(GaussianCloud(), small_camera)
        np.testing.assert_array_equal(view.rgb.data, 1.0)
        np.testing.assert_array_equal(view.alpha.data, 0.0)
        assert view.rgb.shape == (32, 32, 3) and view.alpha.shape == (32, 32, 1)

    def test_single_primitive_matches_closed_form(self, small_camera):
        cloud = single_primitive(opacity=0.6, color=(0.2, 0.4, 0.8))
        proj = project(cloud, small_camera)
        view = render(cloud, small_camera, settings=FULL_EXTENT)
        a, b, c = proj.conics[0]
        jj, ii = np.meshgrid(np.arange(32) + 0.5, np.arange(32) + 0.5)
        dx, dy = jj - proj.means2d[0, 0], ii - proj.means2d[0, 1]
        alpha = 0.6 * np.exp(-0.5 * (a * dx * dx + 2 * b * dx * dy + c * dy * dy))
        np.testing.assert_allclose(view.alpha.data[..., 0], alpha, atol=1e-12)
        expected = alpha[..., None] * np.array([0.2, 0.4, 0.8]) + (1.0 - alpha[..., None])
        np.testing.assert_allclose(view.rgb.data, expected, atol=1e-12)

    def test_two_primitives_composite_front_to_back(self, small_camera):
        cloud = GaussianCloud.concatenate([on_pixel_center(1.5, GREEN), on_pixel_center(1.0, RED)])
        view = render(cloud, small_camera, settings=FULL_EXTENT)
        # weights 0.5 (red, front), 0.25 (green), 0.25 background
        np.testing.assert_allclose(view.rgb.data[16, 16], [0.75, 0.5, 0.25], atol=1e-9)
        assert view.alpha.data[16, 16, 0] == pytest.approx(0.75, abs=1e-9)
        assert view.depth.data[16, 16, 0] == pytest.approx((0.5 * 1.0 + 0.25 * 1.5) / 0.75, abs=1e-9)

    def test_two_primitives_over_black(self, small_camera):
        cloud = GaussianCloud.concatenate([on_pixel_center(1.5, GREEN), on_pixel_center(1.0, RED)])
        view = render(cloud, small_camera, (0.0, 0.0, 0.0), settings=FULL_EXTENT)
        np.testing.assert_allclose(view.rgb.data[16, 16], [0.5, 0.25, 0.0], atol=1e-9)
        assert view.alpha.data[16, 16, 0] == pytest.approx(0.75, abs=1e-9)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.05, 0.95))
    def test_primitive_in_front_only_occludes(self, seed, opacity):
        camera = Camera.orbit(0.0, 0.0, 1.0, 16, 16, 20.0)
        behind = random_cloud(8, seed=seed, opacity=(0.1, 0.5))
        behind.colors = np.ones_like(behind.colors)
        # black occluder nearer than every primitive of `behind`
        front = single_primitive(center=(0.0, 0.0, 0.5), scale=0.1, opacity=opacity, color=(0.0, 0.0, 0.0))
        before = render(behind, camera, (0.0, 0.0, 0.0))
        after = render(GaussianCloud.concatenate([behind, front]), camera, (0.0, 0.0, 0.0))
        # over black, white primitives show exactly the light that reaches them
        assert np.all(after.rgb.data <= before.rgb.data + 1e-12)
        assert np.all(after.alpha.data >= before.alpha.data - 1e-12)
        assert after.rgb.data.sum() < before.rgb.data.sum()

    def test_opaque_front_hides_back(self, small_camera):
        front = on_pixel_center(1.0, RED, opacity=0.9999)
        back = on_pixel_center(1.5, GREEN, opacity=0.9999)
        view = render(GaussianCloud.concatenate([back, front]), small_camera, settings=FULL_EXTENT)
        # clamped to 0.99 each
        expected_alpha = 1.0 - (1.0 - MAX_ALPHA) ** 2
        assert view.alpha.data[16, 16, 0] == pytest.approx(expected_alpha, abs=1e-9)
        np.testing.assert_allclose(view.rgb.data[16, 16],
                                   [MAX_ALPHA + 1e-4, 0.01 * MAX_ALPHA + 1e-4, 1e-4], atol=1e-9)

    def test_list_order_does_not_matter(self, tiny_camera):
        cloud = random_cloud(40, seed=2)
        perm = np.random.default_rng(0).permutation(len(cloud))
        a = render(cloud, tiny_camera)
        b = render(cloud.subset(perm), tiny_camera)
        np.testing.assert_allclose(a.rgb.data, b.rgb.data, atol=1e-12)
        np.testing.assert_allclose(a.alpha.data, b.alpha.data, atol=1e-12)

    def test_band_height_does_not_change_pixels(self, tiny_camera):
        cloud = random_cloud(30, seed=5)
        a = render(cloud, tiny_camera, settings=RasterSettings(band_rows=3))
        b = render(cloud, tiny_camera, settings=RasterSettings(band_rows=64))
        np.testing.assert_allclose(a.rgb.data, b.rgb.data, atol=1e-14)

    def test_values_stay_in_unit_range(self, tiny_camera):
        view = render(random_cloud(60, seed=8, opacity=(0.5, 0.99)), tiny_camera)
        assert view.rgb.data.min() >= 0.0 and view.rgb.data.max() <= 1.0 + 1e-12
        assert view.alpha.data.min() >= 0.0 and view.alpha.data.max() <= 1.0


class TestBackward:

    # fourth-order central stencil; one-row bands keep the transmittance sums short
    STENCIL = ((1, 2 / 3), (2, -1 / 12))
    ROWS = RasterSettings(extent_sigma=np.inf, band_rows=1)

    @staticmethod
    def _loss(cloud, camera, w_rgb, w_alpha):
        view = render(cloud, camera, settings=FULL_EXTENT)
        return float(np.sum(view.rgb.data * w_rgb) + np.sum(view.alpha.data * w_alpha))

    def test_matches_central_differences(self, tiny_camera):
        cloud = random_cloud(3, seed=11, spread=0.08, opacity=(0.3, 0.8))
        rng = np.random.default_rng(1)
        w_rgb = rng.normal(size=(16, 16, 3))
        w_alpha = rng.normal(size=(16, 16, 1))
        grads = render_backward(cloud, tiny_camera, ImageBuffer(w_rgb), ImageBuffer(w_alpha), settings=FULL_EXTENT)

        base = params(cloud)
        numeric = np.zeros_like(base)
        eps = 1e-6
        for idx in np.ndindex(*base.shape):
            up, down = base.copy(), base.copy()
            up[idx] += eps
            down[idx] -= eps
            numeric[idx] = (self._loss(with_params(up), tiny_camera, w_rgb, w_alpha)
                            - self._loss(with_params(down), tiny_camera, w_rgb, w_alpha)) / (2 * eps)
        np.testing.assert_allclose(grads.flat(), numeric, rtol=1e-4, atol=1e-6)

    @pytest.mark.slow
    @pytest.mark.parametrize("seed", [21, 22, 23])
    def test_sum_of_rgb_matches_finite_differences(self, small_camera, seed):
        cloud = random_cloud(10, seed=seed, opacity=(0.2, 0.6))
        # distinct depths so the perturbations never reorder primitives
        cloud.centers[:, 2] = np.random.default_rng(seed).permutation(np.linspace(-0.15, 0.15, 10))
        grads = render_backward(cloud, small_camera, ImageBuffer(np.ones((32, 32, 3))), settings=self.ROWS).flat()

        def loss(flat):
            return float(render(with_params(flat), small_camera, settings=self.ROWS).rgb.data.sum())

        base = params(cloud)
        numeric = np.zeros_like(base)
        h = 1e-3
        for idx in np.ndindex(*base.shape):
            for k, coeff in self.STENCIL:
                up, down = base.copy(), base.copy()
                up[idx] += k * h
                down[idx] -= k * h
                numeric[idx] += coeff * (loss(up) - loss(down)) / h

        significant = np.abs(grads) > 1e-6
        assert significant.sum() > base.size // 2
        rel = np.abs(grads - numeric)[significant] / np.abs(grads)[significant]
        assert rel.max() < 1e-3

    def test_directional_derivative(self, tiny_camera):
        cloud = random_cloud(5, seed=12, spread=0.1)
        rng = np.random.default_rng(2)
        w_rgb = rng.normal(size=(16, 16, 3))
        w_alpha = np.zeros((16, 16, 1))
        grads = render_backward(cloud, tiny_camera, ImageBuffer(w_rgb), settings=FULL_EXTENT)
        direction = rng.normal(size=params(cloud).shape)
        eps = 1e-6
        up = self._loss(with_params(params(cloud) + eps * direction), tiny_camera, w_rgb, w_alpha)
        down = self._loss(with_params(params(cloud) - eps * direction), tiny_camera, w_rgb, w_alpha)
        assert grads.dot(direction) == pytest.approx((up - down) / (2 * eps), rel=1e-4, abs=1e-6)

    def test_zero_upstream_gives_zero_gradients(self, tiny_camera):
        cloud = random_cloud(10, seed=3)
        grads = render_backward(cloud, tiny_camera, ImageBuffer.zeros(16, 16))
        assert not np.any(grads.flat())
        assert grads.is_finite()

    def test_colors_outside_unit_range_get_no_gradient(self, small_camera):
        cloud = single_primitive(color=(1.5, 0.5, -0.2))
        grads = render_backward(cloud, small_camera, ImageBuffer(np.ones((32, 32, 3))))
        assert grads.color[0, 0] == 0.0 and grads.color[0, 2] == 0.0
        assert grads.color[0, 1] != 0.0

    def test_transparent_primitive_gets_no_color_gradient(self, small_camera):
        ghost = single_primitive(color=(0.3, 0.6, 0.9))
        ghost.opacity_logits = np.array([-np.inf])
        cloud = GaussianCloud.concatenate([random_cloud(4, seed=7), ghost])
        upstream = ImageBuffer(np.random.default_rng(5).normal(size=(32, 32, 3)))
        grads = render_backward(cloud, small_camera, upstream, settings=FULL_EXTENT)
        np.testing.assert_array_equal(grads.color[4], 0.0)
        assert np.all(grads.color[:4] != 0.0)
        assert grads.is_finite()

    def test_invisible_primitives_are_not_seen(self, small_camera):
        cloud = GaussianCloud.concatenate([single_primitive(), single_primitive(center=(0.0, 0.0, 2.0))])
        grads = render_backward(cloud, small_camera, ImageBuffer(np.ones((32, 32, 3))))
        np.testing.assert_array_equal(grads.seen, [True, False])
        assert not np.any(grads.flat()[1])

    def test_thread_count_is_bit_reproducible(self, tiny_camera):
        cloud = random_cloud(40, seed=9)
        upstream = ImageBuffer(np.random.default_rng(3).normal(size=(16, 16, 3)))
        one = render_backward(cloud, tiny_camera, upstream, settings=RasterSettings(band_rows=2, threads=1))
        many = render_backward(cloud, tiny_camera, upstream, settings=RasterSettings(band_rows=2, threads=4))
        np.testing.assert_array_equal(one.flat(), many.flat())
        np.testing.assert_array_equal(one.mean2d_norm, many.mean2d_norm)

    def test_empty_cloud(self, tiny_camera):
        assert len(render_backward(GaussianCloud(), tiny_camera, ImageBuffer.zeros(16, 16))) == 0

    def test_upstream_shape_must_match_camera(self, tiny_camera):
        with pytest.raises(DimensionError):
            render_backward(random_cloud(2, seed=0), tiny_camera, ImageBuffer.zeros(8, 8))
        with pytest.raises(DimensionError):
            render_backward(random_cloud(2, seed=0), tiny_camera, ImageBuffer.zeros(16, 16),
                            dL_dalpha=ImageBuffer.zeros(16, 16, 3))

