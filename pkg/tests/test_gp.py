import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import dense_kernel, dense_posterior
from pobo.errors import InputError
from pobo.gp import (
    GpHyperparams,
    cholesky_with_jitter,
    condition,
    fit_hyperparams,
    hyper_grid,
    is_diagonally_dominant,
    log_marginal_likelihood,
    posterior_predict,
    se_covariance,
    se_kernel_matrix,
)

UNIT = GpHyperparams(1.0, 1.0, 0.1)


class TestHyperparams:
    @pytest.mark.parametrize("bad", [0.0, -1.0, math.inf, math.nan])
    def test_rejects_non_positive_or_non_finite(self, bad):
        with pytest.raises(InputError):
            GpHyperparams(bad, 1.0, 1e-5)
        with pytest.raises(InputError):
            GpHyperparams(1.0, bad, 1e-5)
        with pytest.raises(InputError):
            GpHyperparams(1.0, 1.0, bad)


class TestCovariance:
    def test_zero_distance(self):
        assert se_covariance([1.0, 2.0], [1.0, 2.0], UNIT) == 1.0

    def test_sqrt2_lengthscales_gives_inverse_e(self):
        h = GpHyperparams(1.0, 1.7, 0.1)
        b = np.array([1.7 * math.sqrt(2.0), 0.0])
        assert se_covariance([0.0, 0.0], b, h) == pytest.approx(math.exp(-1.0), rel=1e-14)

    def test_linear_in_signal_variance(self):
        a, b = [0.3, -1.0], [1.1, 0.4]
        k1 = se_covariance(a, b, GpHyperparams(1.0, 0.8, 1e-3))
        k2 = se_covariance(a, b, GpHyperparams(2.0, 0.8, 1e-3))
        assert k2 == pytest.approx(2.0 * k1, rel=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(InputError):
            se_covariance([0.0, 1.0], [0.0], UNIT)

    @settings(max_examples=60, deadline=None)
    @given(
        arrays(np.float64, 3, elements=st.floats(-20, 20)),
        arrays(np.float64, 3, elements=st.floats(-20, 20)),
        st.floats(0.1, 5.0),
        st.floats(0.1, 5.0),
    )
    def test_bounds_and_symmetry(self, a, b, sv, ls):
        h = GpHyperparams(sv, ls, 1e-3)
        k = se_covariance(a, b, h)
        assert 0.0 <= k <= sv
        assert k == se_covariance(b, a, h)
        assert se_covariance(a, a, h) == sv

    def test_matrix_matches_pointwise(self, rng):
        A, B = rng.normal(size=(5, 3)), rng.normal(size=(4, 3))
        h = GpHyperparams(1.3, 0.7, 1e-3)
        np.testing.assert_allclose(se_kernel_matrix(A, B, h), dense_kernel(A, B, 1.3, 0.7), rtol=1e-13, atol=0)


class TestPosterior:
    def test_prior_when_nothing_observed(self, rng):
        X = rng.normal(size=(6, 2))
        h = GpHyperparams(2.5, 1.0, 1e-3)
        mean, var = posterior_predict(condition(X, [], [], h), X)
        np.testing.assert_array_equal(mean, 0.0)
        np.testing.assert_array_equal(var, 2.5)

    def test_single_observation_by_hand(self):
        X = np.array([[0.0], [5.0]])
        state = condition(X, [0], [1.0], UNIT)
        mean, var = posterior_predict(state, X, [0])
        assert mean[0] == pytest.approx(1.0 / 1.1, abs=1e-12)
        assert var[0] == pytest.approx(1.0 - 1.0 / 1.1, abs=1e-12)

    def test_matches_dense_inverse(self, rng):
        for _ in range(30):
            m, t = rng.integers(2, 13), rng.integers(0, 9)
            X = rng.normal(size=(m, 2)) * 2
            rows = rng.integers(0, m, size=t).tolist()
            y = rng.normal(size=t).tolist()
            sv, ls, sn = rng.uniform(0.5, 2), rng.uniform(0.5, 2), rng.uniform(1e-3, 0.5)
            mean, var = posterior_predict(condition(X, rows, y, GpHyperparams(sv, ls, sn)), X)
            em, ev = dense_posterior(X, rows, y, sv, ls, sn)
            np.testing.assert_allclose(mean, em, atol=1e-8, rtol=0)
            np.testing.assert_allclose(var, np.clip(ev, 0, sv), atol=1e-8, rtol=0)

    def test_variance_collapses_at_observed_rows_when_noise_vanishes(self, rng):
        X = rng.normal(size=(8, 2)) * 3
        state = condition(X, [1, 4, 6], [0.3, -0.2, 1.0], GpHyperparams(1.0, 1.0, 1e-10))
        _, var = posterior_predict(state, X, [1, 4, 6])
        assert np.all(var <= 1e-4)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_variance_never_exceeds_prior(self, seed):
        r = np.random.default_rng(seed)
        X = r.normal(size=(10, 2))
        rows = r.integers(0, 10, size=r.integers(1, 8)).tolist()
        h = GpHyperparams(r.uniform(0.2, 3), r.uniform(0.2, 3), r.uniform(1e-6, 1))
        _, var = posterior_predict(condition(X, rows, r.normal(size=len(rows)), h), X)
        assert np.all(var >= 0.0) and np.all(var <= h.signal_variance + 1e-10)

    def test_index_out_of_range(self, rng):
        X = rng.normal(size=(4, 2))
        with pytest.raises(InputError):
            condition(X, [4], [0.0], UNIT)
        state = condition(X, [0], [0.0], UNIT)
        with pytest.raises(InputError):
            posterior_predict(state, X, [7])

    def test_duplicate_observations_supported(self):
        X = np.array([[0.0], [1.0]])
        state = condition(X, [0, 0], [1.0, 1.0], UNIT)
        mean, var = posterior_predict(state, X, [0])
        # two noisy copies: mean 2/2.1, variance 1 - 2/2.1
        assert mean[0] == pytest.approx(2 / 2.1, abs=1e-12)
        assert var[0] == pytest.approx(1 - 2 / 2.1, abs=1e-12)


class TestJitter:
    def test_singular_matrix_recovered_by_ladder(self):
        K = np.ones((3, 3))
        L, jitter = cholesky_with_jitter(K, 1.0)
        assert jitter > 0.0
        np.testing.assert_allclose(L @ L.T, K + jitter * np.eye(3), atol=1e-12)

    def test_well_conditioned_needs_none(self):
        _, jitter = cholesky_with_jitter(np.eye(3), 1.0)
        assert jitter == 0.0


class TestLogMarginalLikelihood:
    X = np.array([[0.0], [1.0]])

    def test_zero_observation_exact(self):
        value = log_marginal_likelihood(self.X, [0], [0.0], UNIT)
        assert value == pytest.approx(-0.5 * math.log(2 * math.pi * 1.1), abs=1e-12)
        assert value == pytest.approx(-0.966602, abs=1e-4)

    def test_half_observation_exact(self):
        value = log_marginal_likelihood(self.X, [0], [0.5], UNIT)
        exact = -0.5 * 0.25 / 1.1 - 0.5 * math.log(2 * math.pi * 1.1)
        assert value == pytest.approx(exact, abs=1e-12)
        assert value == pytest.approx(-1.080238, abs=1e-4)

    def test_matches_dense_formula(self, rng):
        X = rng.normal(size=(9, 3))
        rows, y = [0, 3, 5, 8], rng.normal(size=4)
        K = dense_kernel(X[rows], X[rows], 1.4, 0.9) + 0.05 * np.eye(4)
        _, logdet = np.linalg.slogdet(K)
        exact = -0.5 * y @ np.linalg.inv(K) @ y - 0.5 * logdet - 2 * math.log(2 * math.pi)
        assert log_marginal_likelihood(X, rows, y, GpHyperparams(1.4, 0.9, 0.05)) == pytest.approx(exact, abs=1e-10)

    def test_permutation_invariance(self, rng):
        X = rng.normal(size=(7, 2))
        rows, y = np.array([0, 2, 3, 6]), rng.normal(size=4)
        perm = rng.permutation(4)
        h = GpHyperparams(1.0, 1.2, 0.01)
        a = log_marginal_likelihood(X, rows, y, h)
        b = log_marginal_likelihood(X, rows[perm], y[perm], h)
        assert a == pytest.approx(b, abs=1e-10)

    def test_outlying_observations_lower_likelihood(self):
        for seed in range(5):
            r = np.random.default_rng(seed)
            X = r.normal(size=(10, 2))
            h = GpHyperparams(1.0, 1.0, 0.01)
            rows = list(range(6))
            y = r.normal(size=6) * 0.5
            base = log_marginal_likelihood(X, rows, y, h)
            mean, _ = posterior_predict(condition(X, rows[:-1], y[:-1], h), X, [rows[-1]])
            far = y.copy()
            far[-1] = mean[0] + 10.0
            assert log_marginal_likelihood(X, rows, far, h) < base

    def test_needs_observations(self):
        with pytest.raises(InputError):
            log_marginal_likelihood(self.X, [], [], UNIT)


class TestFitHyperparams:
    def test_single_element(self, rng):
        X = rng.normal(size=(5, 2))
        h = GpHyperparams(3.0, 2.0, 0.5)
        assert fit_hyperparams(X, [0, 1], [0.1, 0.2], [h]) == h

    def test_empty_grid(self, rng):
        with pytest.raises(InputError):
            fit_hyperparams(rng.normal(size=(5, 2)), [0, 1], [0.0, 1.0], [])

    def test_needs_two_observations(self, rng):
        with pytest.raises(InputError):
            fit_hyperparams(rng.normal(size=(5, 2)), [0], [0.0], [UNIT])

    def test_matches_exhaustive_scan_and_is_order_invariant(self, rng):
        X = rng.normal(size=(20, 2)) * 2
        y = np.sin(X[:, 0]) + 0.1 * rng.normal(size=20)
        rows = list(range(20))
        grid = hyper_grid([0.5, 1.0, 2.0], [0.5, 1.0, 2.0], [1e-3, 1e-2])
        scores = [log_marginal_likelihood(X, rows, y, h) for h in grid]
        best = grid[int(np.argmax(scores))]
        assert fit_hyperparams(X, rows, y, grid) == best
        assert fit_hyperparams(X, rows, y, list(reversed(grid))) == best

    def test_ties_go_to_earliest(self, rng):
        X = rng.normal(size=(4, 2))
        h = GpHyperparams(1.0, 1.0, 0.1)
        same = GpHyperparams(1.0, 1.0, 0.1)
        assert fit_hyperparams(X, [0, 1], [0.0, 0.1], [h, same]) is h
        assert fit_hyperparams(X, [0, 1], [0.0, 0.1], [same, h]) is same

    @pytest.mark.slow
    def test_recovers_true_triple(self):
        true = GpHyperparams(1.0, 1.25, 1e-5)
        grid = hyper_grid([0.25, 1.0, 4.0], [0.3125, 1.25, 5.0], [1e-5, 1e-2])
        hits = 0
        for seed in range(100):
            r = np.random.default_rng(seed)
            X = r.uniform(-4, 4, size=(40, 2))
            K = se_kernel_matrix(X, X, true) + 1e-5 * np.eye(40)
            y = np.linalg.cholesky(K) @ r.standard_normal(40)
            hits += fit_hyperparams(X, range(40), y, grid) == true
        assert hits / 100 > 0.8


class TestDiagonalDominance:
    def test_single_entry(self):
        assert is_diagonally_dominant(np.array([[2.0]]))

    def test_two_by_two_cases(self):
        assert is_diagonally_dominant(np.array([[1.0, 0.3], [0.3, 1.0]]))
        assert not is_diagonally_dominant(np.array([[1.0, 0.6], [0.6, 1.0]]))

    def test_boundary_uses_sqrt_factor(self):
        m = 5
        off = 1.0 / ((math.sqrt(m - 1) + 1) * (m - 1))
        K = np.full((m, m), off)
        np.fill_diagonal(K, 1.0)
        assert is_diagonally_dominant(K)
        K2 = K.copy()
        K2[~np.eye(m, dtype=bool)] *= 1.001
        assert not is_diagonally_dominant(K2)

    def test_rejects_non_square(self):
        with pytest.raises(InputError):
            is_diagonally_dominant(np.ones((2, 3)))

    def test_rejects_asymmetric(self):
        with pytest.raises(InputError):
            is_diagonally_dominant(np.array([[1.0, 0.1], [0.2, 1.0]]))
