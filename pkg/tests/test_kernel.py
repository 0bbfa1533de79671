import numpy as np
import pytest

from steingof import GaussKernel, median_heuristic
from steingof.exceptions import DegenerateSampleError


class TestGaussKernel:
    def test_value_at_zero_distance(self):
        k = GaussKernel(2.0)
        x = np.array([0.3, -0.7])
        assert k.pair_eval(x, x) == 1.0

    def test_scalar_example(self):
        k = GaussKernel(1.0)
        assert np.isclose(k.pair_eval(np.array([0.0]), np.array([1.0])), np.exp(-0.5))

    def test_gram_matches_pair_eval(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(6, 3))
        Y = rng.normal(size=(4, 3))
        k = GaussKernel(1.7)
        G = k.eval(X, Y)
        for i in range(6):
            for j in range(4):
                assert np.isclose(G[i, j], k.pair_eval(X[i], Y[j]))

    def test_grad_x_matches_finite_differences(self):
        rng = np.random.default_rng(1)
        k = GaussKernel(0.8)
        for _ in range(10):
            x, y = rng.normal(size=3), rng.normal(size=3)
            g = k.grad_x(x, y)
            h = 1e-6
            for i in range(3):
                e = np.zeros(3)
                e[i] = h
                fd = (k.pair_eval(x + e, y) - k.pair_eval(x - e, y)) / (2 * h)
                assert np.isclose(g[i], fd, rtol=1e-4, atol=1e-8)

    def test_grad_antisymmetry(self):
        rng = np.random.default_rng(2)
        k = GaussKernel(1.3)
        x, y = rng.normal(size=4), rng.normal(size=4)
        assert np.allclose(k.grad_x(x, y), -k.grad_y(x, y))

    def test_cross_trace_at_coincident_points(self):
        # sum_i d^2 k / dx_i dy_i = d / bandwidth_sq when x = y
        k = GaussKernel(2.0)
        x = np.array([1.0, 2.0, 3.0])
        assert np.isclose(k.cross_trace(x, x), 3.0 / 2.0)

    def test_cross_trace_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        k = GaussKernel(1.1)
        x, y = rng.normal(size=2), rng.normal(size=2)
        h = 1e-4
        acc = 0.0
        for i in range(2):
            e = np.zeros(2)
            e[i] = h
            acc += (
                k.pair_eval(x + e, y + e)
                - k.pair_eval(x + e, y - e)
                - k.pair_eval(x - e, y + e)
                + k.pair_eval(x - e, y - e)
            ) / (4 * h * h)
        assert np.isclose(k.cross_trace(x, y), acc, rtol=1e-5)


class TestMedianHeuristic:
    def test_three_points_enumerated(self):
        # pairwise distances {1, 2, 3}; the lower median is 2
        X = np.array([[0.0], [1.0], [3.0]])
        assert median_heuristic(X) == 2.0

    def test_two_points(self):
        X = np.array([[0.0, 0.0], [3.0, 4.0]])
        assert median_heuristic(X) == 5.0

    def test_translation_invariance(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(40, 3))
        assert np.isclose(median_heuristic(X), median_heuristic(X + 100.0))

    def test_all_identical_points_rejected(self):
        with pytest.raises(DegenerateSampleError):
            median_heuristic(np.ones((10, 2)))

    def test_subsampling_is_deterministic(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(6000, 2))
        assert median_heuristic(X) == median_heuristic(X)
