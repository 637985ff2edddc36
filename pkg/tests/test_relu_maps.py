from __future__ import annotations

import unittest

import numpy as np
from numpy.testing import assert_allclose

from ntkparam.errors import NumericalError
from ntkparam.kernels import relu_derivative_map, relu_ntk_map, relu_nngp_map


def _random_psd(rng: np.random.Generator, n: int) -> np.ndarray:
    a = rng.standard_normal((n, n + 3))
    return a @ a.T / (n + 3)


class ReluNngpMapTests(unittest.TestCase):
    def test_perfectly_correlated(self) -> None:
        out = relu_nngp_map(np.ones((2, 2)))
        assert_allclose(out, np.full((2, 2), 0.5), atol=1e-15)

    def test_orthogonal(self) -> None:
        out = relu_nngp_map(np.eye(2))
        self.assertAlmostEqual(out[0, 1], 1 / (2 * np.pi), places=12)
        self.assertAlmostEqual(out[0, 0], 0.5, places=12)

    def test_orthogonal_matches_sampling(self) -> None:
        rng = np.random.default_rng(7)
        u, v = rng.standard_normal((2, 2_000_000))
        sampled = np.mean(np.maximum(u, 0) * np.maximum(v, 0))
        self.assertAlmostEqual(relu_nngp_map(np.eye(2))[0, 1], sampled, delta=2e-3)

    def test_anti_correlated(self) -> None:
        out = relu_nngp_map(np.array([[1.0, -1.0], [-1.0, 1.0]]))
        self.assertAlmostEqual(out[0, 1], 0.0, places=12)

    def test_zero_variance_gives_zero(self) -> None:
        kernel = np.array([[0.0, 0.0], [0.0, 2.0]])
        out = relu_nngp_map(kernel)
        self.assertEqual(out[0, 0], 0.0)
        self.assertEqual(out[0, 1], 0.0)
        self.assertAlmostEqual(out[1, 1], 1.0)

    def test_positive_homogeneity(self) -> None:
        kernel = _random_psd(np.random.default_rng(0), 6)
        assert_allclose(relu_nngp_map(3.5 * kernel), 3.5 * relu_nngp_map(kernel), rtol=1e-12)
        assert_allclose(relu_derivative_map(3.5 * kernel), relu_derivative_map(kernel), rtol=1e-12)

    def test_spatial_tensor(self) -> None:
        rng = np.random.default_rng(1)
        x = rng.standard_normal((3, 2, 4))
        kernel = np.einsum("icp,jcq->ijpq", x, x) / 2
        out = relu_nngp_map(kernel)
        self.assertEqual(out.shape, (3, 3, 4, 4))
        flat = kernel.transpose(0, 2, 1, 3).reshape(12, 12)
        expected = relu_nngp_map(flat).reshape(3, 4, 3, 4).transpose(0, 2, 1, 3)
        assert_allclose(out, expected, rtol=1e-12, atol=1e-15)

    def test_negative_variance_raises(self) -> None:
        with self.assertRaises(NumericalError):
            relu_nngp_map(np.array([[-1.0, 0.0], [0.0, 1.0]]))

    def test_correlation_overshoot_raises(self) -> None:
        with self.assertRaises(NumericalError):
            relu_nngp_map(np.array([[1.0, 1.5], [1.5, 1.0]]))

    def test_tiny_overshoot_is_clamped(self) -> None:
        out = relu_nngp_map(np.array([[1.0, 1.0 + 1e-14], [1.0 + 1e-14, 1.0]]))
        self.assertTrue(np.all(np.isfinite(out)))


class ReluDerivativeMapTests(unittest.TestCase):
    def test_known_angles(self) -> None:
        self.assertAlmostEqual(relu_derivative_map(np.ones((2, 2)))[0, 1], 0.5)
        self.assertAlmostEqual(relu_derivative_map(np.eye(2))[0, 1], 0.25)
        self.assertAlmostEqual(
            relu_derivative_map(np.array([[1.0, -1.0], [-1.0, 1.0]]))[0, 1], 0.0
        )

    def test_ntk_map_scales_by_derivative(self) -> None:
        kernel = np.ones((2, 2))
        ntk = np.array([[4.0, 2.0], [2.0, 4.0]])
        assert_allclose(relu_ntk_map(kernel, ntk), ntk / 2)

    def test_ntk_map_shape_mismatch(self) -> None:
        with self.assertRaises(ValueError):
            relu_ntk_map(np.eye(2), np.eye(3))


if __name__ == "__main__":
    unittest.main()
