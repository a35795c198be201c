import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from core.camera import Camera, RelativePose, camera_from_text, camera_to_text, focal_from_mm
from core.cloud_io import MAGIC, cloud_from_bytes, cloud_to_bytes, load_cloud, quantize, save_cloud
from core.errors import (
    CloudFormatError,
    DimensionError,
    HeaderError,
    InvalidPoseError,
    TruncatedPayloadError,
    VersionMismatchError,
)
from core.gaussians import (
    DIAGNOSTICS,
    GaussianCloud,
    GaussianPrimitive,
    covariance_3d,
    covariance_from_params,
    normalize_quaternions,
    quaternion_to_matrix,
)
from core.image import ImageBuffer, hstack, load_png, save_png
from core.transforms import SimilarityTransform2D

from conftest import random_cloud

finite = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False)
quaternions = st.tuples(finite, finite, finite, finite).filter(lambda q: np.linalg.norm(q) > 1e-3)


class TestQuaternions:

    def test_identity(self):
        np.testing.assert_allclose(quaternion_to_matrix(np.array([1.0, 0.0, 0.0, 0.0])), np.eye(3), atol=1e-15)

    def test_half_turn_about_z(self):
        np.testing.assert_allclose(quaternion_to_matrix(np.array([0.0, 0.0, 0.0, 1.0])),
                                   np.diag([-1.0, -1.0, 1.0]), atol=1e-15)

    def test_random_unit_quaternions_are_rotations(self):
        rng = np.random.default_rng(0)
        q = rng.normal(size=(1000, 4))
        q /= np.linalg.norm(q, axis=1, keepdims=True)
        R = quaternion_to_matrix(q)
        eye = np.broadcast_to(np.eye(3), R.shape)
        np.testing.assert_allclose(np.transpose(R, (0, 2, 1)) @ R, eye, atol=1e-12)
        np.testing.assert_allclose(np.linalg.det(R), 1.0, atol=1e-12)

    @given(quaternions)
    def test_unnormalized_input_is_normalized_first(self, q):
        q = np.array(q)
        np.testing.assert_allclose(quaternion_to_matrix(q), quaternion_to_matrix(q / np.linalg.norm(q)), atol=1e-12)

    def test_zero_quaternion_falls_back_to_identity_and_is_counted(self):
        before = DIAGNOSTICS["zero_quaternions"]
        np.testing.assert_array_equal(quaternion_to_matrix(np.zeros(4)), np.eye(3))
        assert DIAGNOSTICS["zero_quaternions"] == before + 1

    def test_normalize_keeps_batch_shape(self):
        q = np.array([[2.0, 0.0, 0.0, 0.0], [0.0, 0.0, 3.0, 4.0]])
        np.testing.assert_allclose(normalize_quaternions(q), [[1, 0, 0, 0], [0, 0, 0.6, 0.8]])


class TestCovariance:

    def _primitive(self, log_scale, rotation=(1.0, 0.0, 0.0, 0.0)):
        return GaussianPrimitive(np.zeros(3), np.array(log_scale, dtype=float), np.array(rotation, dtype=float),
                                 0.0, np.zeros(3))

    def test_unit_scale_identity_rotation(self):
        np.testing.assert_allclose(covariance_3d(self._primitive([0.0, 0.0, 0.0])), np.eye(3))

    def test_scale_is_squared(self):
        np.testing.assert_allclose(covariance_3d(self._primitive([math.log(2.0), 0.0, 0.0])),
                                   np.diag([4.0, 1.0, 1.0]), atol=1e-12)

    @settings(max_examples=50)
    @given(st.tuples(*[st.floats(-3.0, 1.0)] * 3), quaternions)
    def test_eigenvalues_are_squared_scales(self, log_scale, q):
        sigma = covariance_3d(self._primitive(log_scale, q))
        np.testing.assert_allclose(sigma, sigma.T, atol=1e-12)
        eig = np.linalg.eigvalsh(sigma)
        assert eig.min() >= -1e-12
        np.testing.assert_allclose(eig, np.sort(np.exp(2.0 * np.array(log_scale))), rtol=1e-9, atol=1e-12)

    def test_batched_matches_single(self):
        cloud = random_cloud(8, seed=3)
        batched = covariance_from_params(cloud.log_scales, cloud.rotations)
        for i in range(len(cloud)):
            np.testing.assert_allclose(batched[i], covariance_3d(cloud[i]), atol=1e-15)


class TestGaussianCloud:

    def test_mismatched_lengths_rejected(self):
        with pytest.raises(ValueError):
            GaussianCloud(centers=np.zeros((2, 3)), log_scales=np.zeros((1, 3)), rotations=np.zeros((2, 4)),
                          opacity_logits=np.zeros(2), colors=np.zeros((2, 3)))

    def test_colors_clamped_on_read(self):
        cloud = random_cloud(2, seed=0)
        cloud.colors[0] = [-0.5, 0.5, 1.5]
        np.testing.assert_array_equal(cloud.rgb[0], [0.0, 0.5, 1.0])
        np.testing.assert_array_equal(cloud[0].rgb, [0.0, 0.5, 1.0])

    def test_primitives_round_trip(self):
        cloud = random_cloud(5, seed=1)
        assert GaussianCloud.from_primitives(cloud.primitives).parameters_equal(cloud)

    def test_concatenate_and_subset(self):
        a, b = random_cloud(3, seed=1), random_cloud(4, seed=2)
        both = GaussianCloud.concatenate([a, b])
        assert len(both) == 7
        assert both.subset(np.arange(3)).parameters_equal(a)
        assert both.subset(np.arange(3, 7)).parameters_equal(b)

    def test_accumulate_stats_running_mean(self):
        cloud = random_cloud(3, seed=0)
        seen = np.array([True, True, False])
        cloud.accumulate_stats(np.array([1.0, 2.0, 5.0]), np.ones((3, 3)), seen)
        cloud.accumulate_stats(np.array([3.0, 2.0, 5.0]), np.ones((3, 3)), seen)
        np.testing.assert_allclose(cloud.grad_accum, [2.0, 2.0, 0.0])
        np.testing.assert_array_equal(cloud.grad_count, [2, 2, 0])
        np.testing.assert_allclose(cloud.center_grad[:, 0], [2.0, 2.0, 0.0])
        cloud.reset_stats()
        assert not cloud.grad_accum.any() and not cloud.grad_count.any()


class TestCloudFiles:

    def test_empty_cloud_round_trip(self, tmp_path):
        save_cloud(GaussianCloud(), tmp_path / "empty.gs")
        assert len(load_cloud(tmp_path / "empty.gs")) == 0

    def test_large_cloud_round_trip_is_exact(self, tmp_path):
        cloud = quantize(random_cloud(5000, seed=7))
        save_cloud(cloud, tmp_path / "c.gs")
        assert load_cloud(tmp_path / "c.gs").parameters_equal(cloud)

    def test_layout(self):
        blob = cloud_to_bytes(random_cloud(3, seed=0))
        assert blob[:8] == MAGIC
        assert int.from_bytes(blob[8:12], "little") == 3
        assert len(blob) == 12 + 3 * 14 * 4

    def test_wrong_magic_is_header_error(self):
        blob = b"NOTACLOUD" + bytes(20)
        with pytest.raises(HeaderError):
            cloud_from_bytes(blob)

    def test_other_version_is_version_mismatch(self):
        blob = b"GSLIFT02" + (0).to_bytes(4, "little")
        with pytest.raises(VersionMismatchError):
            cloud_from_bytes(blob)

    def test_truncated_payload(self):
        blob = cloud_to_bytes(random_cloud(2, seed=0))
        with pytest.raises(TruncatedPayloadError):
            cloud_from_bytes(blob[:-4])

    def test_errors_share_the_format_category(self):
        for err in (HeaderError, TruncatedPayloadError, VersionMismatchError):
            assert issubclass(err, CloudFormatError)
            assert err("x").category == "format"


class TestCamera:

    def test_focal_from_mm(self):
        assert focal_from_mm(50.0, 512) == pytest.approx(50.0 / 36.0 * 512)

    def test_look_at_projects_to_image_center(self):
        cam = Camera.orbit(0.7, 0.4, 1.05, 64, 48, 80.0, center=(0.0, 0.1, 0.0))
        np.testing.assert_allclose(cam.project_points(np.array([[0.0, 0.1, 0.0]]))[0], [32.0, 24.0], atol=1e-6)

    def test_view_matrix_is_orthonormal(self):
        R = Camera.orbit(-1.2, 0.9, 2.0, 8, 8, 10.0).rotation()
        np.testing.assert_allclose(R @ R.T, np.eye(3), atol=1e-12)
        assert np.linalg.det(R) == pytest.approx(1.0)

    def test_top_view_is_well_defined(self):
        R = Camera.orbit(0.0, 0.5 * math.pi, 1.0, 8, 8, 10.0).rotation()
        np.testing.assert_allclose(R @ R.T, np.eye(3), atol=1e-12)

    def test_nonpositive_radius_rejected(self):
        with pytest.raises(InvalidPoseError):
            Camera(8, 8, 10.0, (0.0, 0.0, 1.0), radius=0.0)

    def test_reference_view_has_identity_pose(self):
        cam = Camera.orbit(0.0, 0.0, 1.05, 16, 16, 20.0)
        assert cam.relative_to(cam).is_identity()

    def test_relative_pose_composes_back(self):
        ref = Camera.orbit(0.0, 0.0, 1.05, 16, 16, 20.0)
        other = Camera.orbit(1.1, 0.6, 1.05, 16, 16, 20.0)
        back = ref.compose(other.relative_to(ref))
        np.testing.assert_allclose(back.position, other.position, atol=1e-9)
        np.testing.assert_allclose(back.rotation(), other.rotation(), atol=1e-9)

    def test_improper_relative_rotation_rejected(self):
        ref = Camera.orbit(0.0, 0.0, 1.0, 8, 8, 10.0)
        with pytest.raises(InvalidPoseError):
            ref.compose(RelativePose(np.diag([1.0, 1.0, -1.0]), np.zeros(3)))

    def test_text_round_trip(self):
        cam = Camera.orbit(0.3, 0.2, 1.05, 64, 32, 88.0)
        again = camera_from_text(camera_to_text(cam))
        assert again == cam
        assert "focal_px=" in camera_to_text(cam)


class TestImages:

    def test_shape_and_channels(self):
        img = ImageBuffer.zeros(4, 3, 1)
        assert img.shape == (3, 4, 1) and img.width == 4 and img.height == 3

    def test_two_dimensional_data_becomes_single_channel(self):
        assert ImageBuffer(np.zeros((2, 5))).channels == 1

    def test_bad_channel_count(self):
        with pytest.raises(DimensionError):
            ImageBuffer(np.zeros((2, 2, 2)))

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            ImageBuffer(np.full((2, 2, 3), np.nan))

    def test_png_round_trip_is_eight_bit(self, tmp_path):
        data = np.linspace(0.0, 1.0, 4 * 4 * 3).reshape(4, 4, 3)
        save_png(ImageBuffer(data), tmp_path / "a.png")
        back = load_png(tmp_path / "a.png")
        np.testing.assert_allclose(back.data, np.round(data * 255.0) / 255.0)

    def test_quantized_matches_png_read_back(self, tmp_path):
        data = np.random.default_rng(4).uniform(-0.2, 1.2, size=(5, 6, 3))
        save_png(ImageBuffer(data), tmp_path / "a.png")
        assert np.array_equal(ImageBuffer(data).quantized().data, load_png(tmp_path / "a.png").data)

    def test_hstack(self):
        strip = hstack([ImageBuffer.zeros(3, 2), ImageBuffer.filled(5, 2, (1.0, 1.0, 1.0))])
        assert strip.shape == (2, 8, 3)


class TestSimilarityTransform:

    @given(st.floats(-50, 50), st.floats(-50, 50), st.floats(-3.0, 3.0), st.floats(0.1, 10.0))
    def test_inverse_undoes_apply(self, tx, ty, angle, scale):
        xf = SimilarityTransform2D((tx, ty), angle, scale)
        pts = np.array([[0.0, 0.0], [1.0, 2.0], [-3.0, 5.0]])
        np.testing.assert_allclose(xf.inverse().apply(xf.apply(pts)), pts, atol=1e-8)

    def test_matrix_form_agrees(self):
        xf = SimilarityTransform2D((3.0, -1.0), 0.4, 1.5)
        p = np.array([2.0, 7.0])
        np.testing.assert_allclose((xf.matrix @ np.append(p, 1.0))[:2], xf.apply(p)[0])

    def test_scale_must_be_positive(self):
        with pytest.raises(ValueError):
            SimilarityTransform2D((0.0, 0.0), 0.0, 0.0)
