import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import steingof as sg
from steingof import GaussKernel, Sample, TestLocations


def std_normal(d):
    return sg.gaussian_model(np.zeros(d), 1.0)


def brute_fssd2(model, X, locations):
    T = sg.feature_matrix(model, X, locations)
    n = T.shape[0]
    G = T @ T.T
    return (G.sum() - np.trace(G)) / (n * (n - 1))


class TestXi:
    def test_closed_form_standard_normal(self):
        # xi(x, v) = -exp(-(v-x)^2 / (2 s2)) (x s2 - v + x) / s2 at d=1
        val = sg.xi(std_normal(1), np.array([0.0]), np.array([1.0]), GaussKernel(1.0))
        assert np.isclose(val[0], np.exp(-0.5))

    def test_vanishes_when_score_cancels_kernel_grad(self):
        # for p=N(0,1), s2=1: xi(x, v) = -(2x - v) k; zero at v = 2x
        val = sg.xi(std_normal(1), np.array([0.5]), np.array([1.0]), GaussKernel(1.0))
        assert np.isclose(val[0], 0.0)

    def test_zero_mean_under_model(self):
        # the Stein feature integrates to zero under the model density
        rng = np.random.default_rng(0)
        X = rng.normal(size=(100000, 2))
        loc = TestLocations(np.array([[0.7, -0.4]]), GaussKernel(1.5))
        T = sg.feature_matrix(std_normal(2), X, loc)
        mean = T.mean(axis=0)
        se = T.std(axis=0, ddof=1) / np.sqrt(len(X))
        assert np.all(np.abs(mean) < 4 * se)


class TestTau:
    def test_single_location_matches_xi(self):
        k = GaussKernel(1.2)
        x = np.array([0.3])
        out = sg.tau(std_normal(1), x, TestLocations(np.array([[0.9]]), k))
        assert np.allclose(out, sg.xi(std_normal(1), x, np.array([0.9]), k))

    def test_block_scaling_with_two_locations(self):
        # with J=2 every block is the per-location feature divided by sqrt(d J)
        k = GaussKernel(1.0)
        model = std_normal(2)
        x = np.array([0.2, -0.5])
        V = np.array([[1.0, 0.0], [0.0, 1.0]])
        out = sg.tau(model, x, TestLocations(V, k))
        assert out.shape == (4,)
        for j in range(2):
            block = out[j * 2:(j + 1) * 2] * np.sqrt(4.0)
            assert np.allclose(block, sg.xi(model, x, V[j], k))


class TestFssd2Ustat:
    def test_two_points(self):
        model = std_normal(1)
        loc = TestLocations(np.array([[0.5]]), GaussKernel(1.0))
        X = np.array([[0.3], [-1.2]])
        T = sg.feature_matrix(model, X, loc)
        assert np.isclose(sg.fssd2_ustat(model, X, loc), T[0] @ T[1])

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10**6))
    def test_linear_formula_equals_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 50))
        d = int(rng.integers(1, 4))
        J = int(rng.integers(1, 4))
        X = rng.normal(size=(n, d))
        loc = TestLocations(rng.normal(size=(J, d)), GaussKernel(float(rng.uniform(0.3, 3.0))))
        model = std_normal(d)
        fast = sg.fssd2_ustat(model, X, loc)
        slow = brute_fssd2(model, X, loc)
        assert abs(fast - slow) <= 1e-10 * max(1.0, abs(slow))

    def test_row_order_invariance(self):
        rng = np.random.default_rng(11)
        X = rng.normal(size=(30, 2))
        loc = TestLocations(rng.normal(size=(2, 2)), GaussKernel(1.0))
        model = std_normal(2)
        a = sg.fssd2_ustat(model, X, loc)
        b = sg.fssd2_ustat(model, X[::-1].copy(), loc)
        assert np.isclose(a, b, rtol=1e-12)

    def test_unbiased_under_null(self):
        rng = np.random.default_rng(12)
        model = std_normal(1)
        loc = TestLocations(np.array([[1.0]]), GaussKernel(1.0))
        vals = np.array(
            [sg.fssd2_ustat(model, rng.normal(size=(20, 1)), loc) for _ in range(2000)]
        )
        se = vals.std(ddof=1) / np.sqrt(len(vals))
        assert abs(vals.mean()) < 3 * se


class TestMoments:
    def test_covariance_matches_brute_force(self):
        rng = np.random.default_rng(13)
        X = rng.normal(size=(40, 2))
        loc = TestLocations(rng.normal(size=(2, 2)), GaussKernel(0.9))
        feats = sg.moments(std_normal(2), X, loc)
        T = sg.feature_matrix(std_normal(2), X, loc)
        mu = T.mean(axis=0)
        C = (T - mu).T @ (T - mu) / len(X)
        assert np.allclose(feats.mu_hat, mu)
        assert np.allclose(feats.sigma_q_hat, C, atol=1e-12)

    def test_constant_rows_give_zero_covariance(self):
        # all sample points equal, so the feature rows coincide
        X = np.full((5, 1), 0.4)
        loc = TestLocations(np.array([[1.0]]), GaussKernel(1.0))
        feats = sg.moments(std_normal(1), X, loc)
        assert np.allclose(feats.sigma_q_hat, 0.0, atol=1e-15)


class TestSigmaH1:
    def test_quadratic_form(self):
        rng = np.random.default_rng(14)
        X = rng.normal(size=(50, 1)) + 1.0
        loc = TestLocations(np.array([[0.5]]), GaussKernel(1.0))
        feats = sg.moments(std_normal(1), X, loc)
        expect = float(4.0 * feats.mu_hat @ feats.sigma_q_hat @ feats.mu_hat)
        assert np.isclose(sg.sigma_h1_hat(feats), expect)

    def test_nonnegative(self):
        rng = np.random.default_rng(15)
        X = rng.normal(size=(20, 2))
        loc = TestLocations(rng.normal(size=(3, 2)), GaussKernel(1.0))
        assert sg.sigma_h1_hat(sg.moments(std_normal(2), X, loc)) >= 0.0


class TestHp:
    def test_closed_form_value_at_origin(self):
        # d=1, p=N(0,1): h(x,y) = exp(-(x-y)^2/2k2)(k2 - (k2+1)x^2
        #   + (k4+2k2+2)xy - (k2+1)y^2)/k4, so h(0,0) = 1/k2
        val = sg.hp(std_normal(1), np.array([0.0]), np.array([0.0]), GaussKernel(2.0))
        assert np.isclose(val, 0.5)

    def test_matches_closed_form_on_grid(self):
        k2 = 1.5
        kern = GaussKernel(k2)
        model = std_normal(1)
        for x in (-1.0, 0.3, 2.0):
            for y in (-0.7, 0.0, 1.4):
                expect = np.exp(-((x - y) ** 2) / (2 * k2)) * (
                    k2 - (k2 + 1) * x * x
                    + (k2 * k2 + 2 * k2 + 2) * x * y
                    - (k2 + 1) * y * y
                ) / (k2 * k2)
                got = sg.hp(model, np.array([x]), np.array([y]), kern)
                assert np.isclose(got, expect, rtol=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(16)
        model = std_normal(3)
        kern = GaussKernel(1.0)
        x, y = rng.normal(size=3), rng.normal(size=3)
        assert np.isclose(sg.hp(model, x, y, kern), sg.hp(model, y, x, kern))

    def test_gram_matches_pairwise(self):
        rng = np.random.default_rng(17)
        X = rng.normal(size=(8, 2))
        model = std_normal(2)
        kern = GaussKernel(1.3)
        H = sg.hp_gram(model, X, kern)
        for i in range(8):
            for j in range(8):
                assert np.isclose(H[i, j], sg.hp(model, X[i], X[j], kern), rtol=1e-10)


class TestKsd2Ustat:
    def test_two_points(self):
        rng = np.random.default_rng(18)
        X = rng.normal(size=(2, 2))
        model = std_normal(2)
        kern = GaussKernel(1.0)
        assert np.isclose(
            sg.ksd2_ustat(model, X, kern), sg.hp(model, X[0], X[1], kern)
        )

    def test_blocked_matches_gram_formula(self):
        rng = np.random.default_rng(19)
        X = rng.normal(size=(150, 2))
        model = std_normal(2)
        kern = GaussKernel(1.0)
        H = sg.hp_gram(model, X, kern)
        n = len(X)
        expect = (H.sum() - np.trace(H)) / (n * (n - 1))
        assert np.isclose(sg.ksd2_ustat(model, X, kern, block=32), expect, rtol=1e-10)

    def test_near_zero_under_null(self):
        rng = np.random.default_rng(20)
        vals = np.array(
            [
                sg.ksd2_ustat(std_normal(1), rng.normal(size=(100, 1)), GaussKernel(1.0))
                for _ in range(50)
            ]
        )
        se = vals.std(ddof=1) / np.sqrt(len(vals))
        assert abs(vals.mean()) < 4 * se


class TestLks2Stat:
    def test_disjoint_pair_structure(self):
        X = np.array([[0.1], [0.7], [-0.4], [1.2]])
        model = std_normal(1)
        kern = GaussKernel(1.0)
        out = sg.lks2_stat(model, X, kern)
        h1 = sg.hp(model, X[0], X[1], kern)
        h2 = sg.hp(model, X[2], X[3], kern)
        assert out.n_pairs == 2
        assert np.isclose(out.value, (h1 + h2) / 2)
        assert np.isclose(out.pair_std, np.std([h1, h2], ddof=1))

    def test_odd_sample_drops_last_point(self):
        rng = np.random.default_rng(21)
        X = rng.normal(size=(9, 1))
        model = std_normal(1)
        kern = GaussKernel(1.0)
        a = sg.lks2_stat(model, X, kern)
        b = sg.lks2_stat(model, X[:8], kern)
        assert a.n_pairs == 4
        assert np.isclose(a.value, b.value)

    def test_zero_mean_under_null(self):
        rng = np.random.default_rng(22)
        out = sg.lks2_stat(std_normal(1), rng.normal(size=(200000, 1)), GaussKernel(1.0))
        se = out.pair_std / np.sqrt(out.n_pairs)
        assert abs(out.value) < 4 * se


class TestTestLocations:
    def test_duplicate_rows_rejected(self):
        with pytest.raises(Exception):
            TestLocations(np.array([[1.0], [1.0]]), GaussKernel(1.0))

    def test_json_roundtrip(self):
        loc = TestLocations(np.array([[1.0, 2.0], [0.0, -1.0]]), GaussKernel(2.5))
        back = TestLocations.from_json(loc.to_json())
        assert np.array_equal(back.V, loc.V)
        assert back.kernel.bandwidth_sq == 2.5
