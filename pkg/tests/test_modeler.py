import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import beta_ref, dense_posterior
from pobo.curator import MeasurementOracle, center_columns
from pobo.errors import InputError
from pobo.gp import GpHyperparams, condition
from pobo.modeler import BoConfig, ObservationLog, beta_t, run_bo, ucb_select

H = GpHyperparams(1.0, 1.0, 0.1)


class TestBeta:
    def test_log_of_one(self):
        assert beta_t(1, 1, math.pi**2 / 6) == 0.0

    def test_reference_value(self):
        assert beta_t(10_000, 1, 0.025) == pytest.approx(26.79384, abs=5e-6)
        assert beta_t(10_000, 1, 0.025) == pytest.approx(beta_ref(10_000, 1, 0.025), rel=1e-12)

    @settings(max_examples=200, deadline=None)
    @given(st.integers(1, 10**6), st.integers(1, 10**4), st.floats(1e-9, 0.999))
    def test_transcription(self, n, t, dp):
        assert beta_t(n, t, dp) == pytest.approx(beta_ref(n, t, dp), rel=1e-12)

    def test_increasing_in_t(self):
        values = [beta_t(100, t, 0.05) for t in range(1, 30)]
        assert all(b > a for a, b in zip(values, values[1:]))

    def test_bad_inputs(self):
        for args in [(0, 1, 0.1), (1, 0, 0.1), (5, 1, 0.0)]:
            with pytest.raises(InputError):
                beta_t(*args)


class TestConfigAndLog:
    def test_config_validation(self):
        with pytest.raises(InputError):
            BoConfig(0, 0.1)
        with pytest.raises(InputError):
            BoConfig(5, 1.0)

    def test_log_ordering(self):
        log = ObservationLog()
        log.append(1, 0, 1.0, 0.0)
        with pytest.raises(InputError):
            log.append(3, 0, 2.0, 0.0)
        with pytest.raises(InputError):
            log.append(2, 0, 0.5, 0.0)


class TestSelect:
    def test_beta_zero_picks_max_mean(self):
        X = np.array([[0.0], [3.0], [0.5]])
        state = condition(X, [1], [2.0], H)
        assert ucb_select(state, X, 0.0) == 1

    def test_prior_tie_goes_to_index_zero(self, rng):
        X = rng.normal(size=(5, 2))
        assert ucb_select(condition(X, [], [], H), X, 4.0) == 0

    def test_hand_evaluated_two_candidates(self):
        # after y=1 at x0: candidate 0 has mean 1/1.1, var 1-1/1.1;
        # candidate 1 at distance 1 has k = e^{-1/2}
        X = np.array([[0.0], [1.0]])
        state = condition(X, [0], [1.0], H)
        k = math.exp(-0.5)
        scores = []
        for beta in (0.0, 4.0):
            s0 = 1 / 1.1 + math.sqrt(beta) * math.sqrt(1 - 1 / 1.1)
            s1 = k / 1.1 + math.sqrt(beta) * math.sqrt(1 - k * k / 1.1)
            scores.append(int(s1 > s0))
            assert ucb_select(state, X, beta) == scores[-1]
        assert scores == [0, 1]

    def test_exclusion(self, rng):
        X = rng.normal(size=(3, 2))
        state = condition(X, [], [], H)
        assert ucb_select(state, X, 1.0, excluded={0}) == 1
        with pytest.raises(InputError):
            ucb_select(state, X, 1.0, excluded={0, 1, 2})


def _exhaustive_run(X, truth, T, dprime, hyper, exclude):
    """Selection loop evaluated with dense inverses at every step."""
    n = len(X)
    rows, ys = [], []
    for t in range(1, T + 1):
        b = 2 * math.log(n * t * t * math.pi**2 / (6 * dprime))
        mean, var = dense_posterior(X, rows, ys, hyper.signal_variance, hyper.length_scale, hyper.noise_variance)
        score = mean + math.sqrt(b) * np.sqrt(np.clip(var, 0, None))
        if exclude:
            score[rows] = -np.inf
        i = int(np.argmax(score))
        rows.append(i)
        ys.append(truth[i])
    return rows


class TestRunBo:
    def test_single_step_picks_zero(self, rng):
        X = rng.normal(size=(6, 2))
        log = run_bo(X, MeasurementOracle(np.arange(6.0)), BoConfig(1, 0.05), H)
        assert log.row_indices.tolist() == [0]

    def test_deterministic(self, rng):
        X = rng.normal(size=(20, 2))
        f = rng.normal(size=20)
        logs = [run_bo(X, MeasurementOracle(f, 0.01, rng_seed=4), BoConfig(8, 0.05), H) for _ in range(2)]
        assert logs[0].entries == logs[1].entries

    def test_betas_logged_exactly(self, rng):
        X = rng.normal(size=(15, 2))
        log = run_bo(X, MeasurementOracle(rng.normal(size=15)), BoConfig(6, 0.025), H)
        assert [e.beta_t for e in log] == [beta_t(15, t, 0.025) for t in range(1, 7)]

    def test_matches_exhaustive_on_five_candidates(self):
        for seed in range(25):
            r = np.random.default_rng(seed)
            X = r.normal(size=(5, 2)) * 1.5
            f = r.normal(size=5)
            for exclude in (False, True):
                log = run_bo(X, MeasurementOracle(f), BoConfig(3, 0.05, exclude), H)
                assert log.row_indices.tolist() == _exhaustive_run(X, f, 3, 0.05, H, exclude)

    def test_exclude_gives_distinct_rows(self, rng):
        X = rng.normal(size=(12, 2))
        log = run_bo(X, MeasurementOracle(rng.normal(size=12), 1e-3, rng_seed=0), BoConfig(12, 0.05, True), H)
        assert sorted(log.row_indices.tolist()) == list(range(12))
        with pytest.raises(InputError):
            run_bo(X, MeasurementOracle(np.zeros(12)), BoConfig(13, 0.05, True), H)

    def test_repeats_allowed_by_default(self):
        # one dominant candidate far from the rest is re-queried once its variance is gone
        X = np.array([[0.0], [0.01], [50.0]])
        f = np.array([10.0, 9.9, -10.0])
        log = run_bo(X, MeasurementOracle(f), BoConfig(10, 0.5), GpHyperparams(100.0, 1.0, 1e-3))
        assert len(set(log.row_indices.tolist())) < 10

    def test_identity_transform_equals_baseline(self, rng):
        X = rng.normal(size=(25, 3)) + 10.0
        f = rng.normal(size=25)
        Xc = center_columns(X)
        a = run_bo(Xc, MeasurementOracle(f, 1e-4, rng_seed=9), BoConfig(10, 0.05, True), H)
        b = run_bo(X, MeasurementOracle(f, 1e-4, rng_seed=9), BoConfig(10, 0.05, True), H)
        assert a.row_indices.tolist() == b.row_indices.tolist()

    def test_noiseless_unique_max_found_within_n(self, rng):
        X = rng.normal(size=(15, 2))
        f = rng.normal(size=15)
        log = run_bo(X, MeasurementOracle(f), BoConfig(15, 0.05, True), GpHyperparams(1.0, 1.0, 1e-6))
        assert int(np.argmax(f)) in log.row_indices.tolist()

    def test_oracle_size_mismatch(self, rng):
        with pytest.raises(InputError):
            run_bo(rng.normal(size=(4, 2)), MeasurementOracle(np.zeros(5)), BoConfig(2, 0.05), H)
