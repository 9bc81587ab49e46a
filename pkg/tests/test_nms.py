"""Tests for edge thinning by non-maximum suppression."""

import numpy as np
import pytest

from bdcnet.evaluation.nms import conv_tri, edge_orientation, nms_thin, triangle_kernel


class TestTriangleSmoothing:
    def test_kernel(self):
        kernel = triangle_kernel(2)
        np.testing.assert_allclose(kernel, np.array([1, 2, 3, 2, 1]) / 9)

    def test_constant_map_unchanged(self):
        np.testing.assert_allclose(conv_tri(np.full((7, 5), 0.4)), 0.4)

    def test_zero_radius_is_identity(self):
        x = np.random.default_rng(0).uniform(size=(4, 4))
        np.testing.assert_array_equal(conv_tri(x, 0), x)


class TestNms:
    """Test non-maximum suppression."""

    def test_all_zero(self):
        out = nms_thin(np.zeros((10, 10)))
        assert not out.any()

    def test_thin_line_unchanged(self):
        """A 1-pixel vertical line of 0.9 on zero background is already thin."""
        prob = np.zeros((20, 20))
        prob[:, 10] = 0.9
        np.testing.assert_array_equal(nms_thin(prob), prob)

    def test_ramp_band_keeps_centre(self):
        """A 3-wide band (0.5, 0.9, 0.5) keeps only the 0.9 column."""
        prob = np.zeros((20, 20))
        prob[:, 9] = 0.5
        prob[:, 10] = 0.9
        prob[:, 11] = 0.5

        out = nms_thin(prob)

        expected = np.zeros_like(prob)
        expected[:, 10] = 0.9
        np.testing.assert_array_equal(out, expected)

    def test_horizontal_band(self):
        prob = np.zeros((20, 20))
        prob[7] = 0.3
        prob[8] = 0.8
        prob[9] = 0.3
        out = nms_thin(prob)
        assert np.all(out[8] == 0.8)
        assert not out[7].any()
        assert not out[9].any()

    def test_binary_map_is_stable(self):
        """Equal values are never suppressed, so binary GT passes through."""
        gt = np.zeros((16, 16))
        gt[3, 2:12] = 1.0
        gt[5:14, 8] = 1.0
        np.testing.assert_array_equal(nms_thin(gt), gt)

    def test_output_is_subset(self):
        prob = np.random.default_rng(2).uniform(size=(12, 12))
        out = nms_thin(prob)
        assert np.all((out == 0) | (out == prob))
        assert out.dtype == prob.dtype

    def test_rejects_non_2d(self):
        with pytest.raises(ValueError, match="2-D"):
            nms_thin(np.zeros((1, 4, 4)))

    def test_orientation_of_vertical_edge(self):
        """A vertical ridge has its normal along the columns (angle near 0 or pi)."""
        prob = np.zeros((15, 15))
        prob[:, 7] = 1.0
        theta = edge_orientation(prob)[7, 7]
        assert min(theta, np.pi - theta) < 0.1
