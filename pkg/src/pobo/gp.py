"""Gaussian-process regression with the isotropic squared-exponential kernel.

The prior mean is fixed at zero. Posterior state is always rebuilt from the
full set of observations through a Cholesky factor of ``K + noise * I``;
no matrix is ever inverted explicitly.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.spatial.distance import cdist

from .errors import InputError, NumericError

__all__ = [
    "GpHyperparams",
    "GpPosterior",
    "as_candidates",
    "se_covariance",
    "se_kernel_matrix",
    "condition",
    "posterior_predict",
    "log_marginal_likelihood",
    "fit_hyperparams",
    "hyper_grid",
    "is_diagonally_dominant",
    "cholesky_with_jitter",
]

_JITTER_LADDER = (0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)


@dataclass(frozen=True)
class GpHyperparams:
    """Kernel hyperparameters: signal variance, length scale, noise variance."""

    signal_variance: float
    length_scale: float
    noise_variance: float

    def __post_init__(self):
        for name in ("signal_variance", "length_scale", "noise_variance"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value <= 0.0:
                raise InputError(f"{name} must be finite and > 0, got {value!r}")
            object.__setattr__(self, name, value)

    @property
    def signal_std(self) -> float:
        return math.sqrt(self.signal_variance)

    def as_dict(self) -> dict:
        return {
            "signal_variance": self.signal_variance,
            "length_scale": self.length_scale,
            "noise_variance": self.noise_variance,
        }


@dataclass(frozen=True)
class GpPosterior:
    """Posterior over a candidate matrix after observing some of its rows.

    ``factor`` is the lower Cholesky factor of ``K_tt + noise * I`` (plus any
    jitter that was needed) and ``alpha`` solves that system against the
    observations.
    """

    hyper: GpHyperparams
    observed_rows: tuple
    observations: np.ndarray
    factor: np.ndarray
    alpha: np.ndarray
    jitter: float = 0.0

    def __post_init__(self):
        t = len(self.observed_rows)
        if self.observations.shape != (t,) or self.factor.shape != (t, t):
            raise InputError("observed_rows, observations and factor disagree in size")
        if t and not np.all(np.diag(self.factor) > 0.0):
            raise NumericError("Cholesky factor must have a strictly positive diagonal")

    @property
    def n_observed(self) -> int:
        return len(self.observed_rows)


def as_candidates(rows) -> np.ndarray:
    """Validate a candidate matrix and return it as a 2-D float array."""
    arr = np.asarray(rows, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InputError(f"candidate matrix must be 2-D and non-empty, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError("candidate matrix contains non-finite entries")
    return arr


def se_covariance(a, b, hyper: GpHyperparams) -> float:
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise InputError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    diff = a - b
    sq = float(diff @ diff)
    return hyper.signal_variance * math.exp(-0.5 * sq / hyper.length_scale**2)


def se_kernel_matrix(A, B, hyper: GpHyperparams) -> np.ndarray:
    """Cross-covariance matrix ``k(A_i, B_j)`` for row sets ``A`` and ``B``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise InputError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    sq = cdist(A, B, "sqeuclidean")
    return hyper.signal_variance * np.exp(-0.5 * sq / hyper.length_scale**2)


def cholesky_with_jitter(K: np.ndarray, scale: float) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``K``, adding ``scale``-relative jitter on failure.

    Jitter runs from 1e-12 to 1e-6 times ``scale`` in decades.
    """
    eye = np.eye(K.shape[0])
    for rel in _JITTER_LADDER:
        jitter = rel * scale
        try:
            L = np.linalg.cholesky(K + jitter * eye if jitter else K)
        except np.linalg.LinAlgError:
            continue
        if np.all(np.isfinite(L)):
            return L, jitter
    raise NumericError(
        f"matrix of size {K.shape[0]} is not positive definite even with jitter {1e-6 * scale:g}"
    )


def _check_indices(indices, n: int, what: str) -> np.ndarray:
    idx = np.asarray(list(indices) if not isinstance(indices, np.ndarray) else indices)
    if idx.size == 0:
        return np.zeros(0, dtype=int)
    if not np.issubdtype(idx.dtype, np.integer):
        raise InputError(f"{what} must be integers")
    idx = idx.astype(int).ravel()
    bad = (idx < 0) | (idx >= n)
    if bad.any():
        raise InputError(f"{what} out of range [0, {n}): {idx[bad][:5].tolist()}")
    return idx


def condition(candidates, observed_rows: Sequence[int], observations, hyper: GpHyperparams) -> GpPosterior:
    """Build the posterior after observing ``observations`` at ``observed_rows``."""
    X = as_candidates(candidates)
    rows = _check_indices(observed_rows, X.shape[0], "observed_rows")
    y = np.asarray(observations, dtype=float).ravel()
    if y.shape[0] != rows.shape[0]:
        raise InputError(f"{rows.shape[0]} observed rows but {y.shape[0]} observations")
    if not np.all(np.isfinite(y)):
        raise InputError("observations contain non-finite values")
    if rows.size == 0:
        empty = np.zeros((0, 0))
        return GpPosterior(hyper, (), np.zeros(0), empty, np.zeros(0))
    Xt = X[rows]
    K = se_kernel_matrix(Xt, Xt, hyper)
    K[np.diag_indices_from(K)] += hyper.noise_variance
    L, jitter = cholesky_with_jitter(K, hyper.signal_variance)
    alpha = cho_solve((L, True), y)
    return GpPosterior(hyper, tuple(int(i) for i in rows), y.copy(), L, alpha, jitter)


def posterior_predict(state: GpPosterior, candidates, query_indices=None) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and variance at the queried candidate rows.

    ``query_indices=None`` queries every row. Variances are clipped into
    ``[0, signal_variance]`` to absorb round-off.
    """
    X = as_candidates(candidates)
    if state.observed_rows:
        _check_indices(state.observed_rows, X.shape[0], "observed_rows")
    if query_indices is None:
        q = np.arange(X.shape[0])
    else:
        q = _check_indices(query_indices, X.shape[0], "query_indices")
    sv = state.hyper.signal_variance
    if state.n_observed == 0:
        return np.zeros(q.shape[0]), np.full(q.shape[0], sv)
    Kqt = se_kernel_matrix(X[q], X[list(state.observed_rows)], state.hyper)
    mean = Kqt @ state.alpha
    v = solve_triangular(state.factor, Kqt.T, lower=True, check_finite=False)
    var = sv - np.einsum("ij,ij->j", v, v)
    return mean, np.clip(var, 0.0, sv)


def _lml_from_sqdist(sq: np.ndarray, y: np.ndarray, hyper: GpHyperparams) -> float:
    K = hyper.signal_variance * np.exp(-0.5 * sq / hyper.length_scale**2)
    K[np.diag_indices_from(K)] += hyper.noise_variance
    L, _ = cholesky_with_jitter(K, hyper.signal_variance)
    alpha = cho_solve((L, True), y)
    t = y.shape[0]
    return float(-0.5 * y @ alpha - np.log(np.diag(L)).sum() - 0.5 * t * math.log(2.0 * math.pi))


def _observed_block(candidates, observed_rows, observations):
    X = as_candidates(candidates)
    rows = _check_indices(observed_rows, X.shape[0], "observed_rows")
    y = np.asarray(observations, dtype=float).ravel()
    if y.shape[0] != rows.shape[0]:
        raise InputError(f"{rows.shape[0]} observed rows but {y.shape[0]} observations")
    return X[rows], y


def log_marginal_likelihood(candidates, observed_rows, observations, hyper: GpHyperparams) -> float:
    Xt, y = _observed_block(candidates, observed_rows, observations)
    if y.shape[0] < 1:
        raise InputError("log marginal likelihood needs at least one observation")
    return _lml_from_sqdist(cdist(Xt, Xt, "sqeuclidean"), y, hyper)


def fit_hyperparams(candidates, observed_rows, observations, grid: Iterable[GpHyperparams]) -> GpHyperparams:
    """Grid-search maximum-likelihood hyperparameters.

    Returns the first grid element attaining the highest log marginal
    likelihood. Grid points whose system cannot be factorized are skipped.
    """
    grid = list(grid)
    if not grid:
        raise InputError("hyperparameter grid is empty")
    Xt, y = _observed_block(candidates, observed_rows, observations)
    if y.shape[0] < 2:
        raise InputError("hyperparameter fitting needs at least two observations")
    sq = cdist(Xt, Xt, "sqeuclidean")
    best, best_val = None, -math.inf
    for hyper in grid:
        try:
            val = _lml_from_sqdist(sq, y, hyper)
        except NumericError:
            continue
        if val > best_val:
            best, best_val = hyper, val
    if best is None:
        raise NumericError("no grid point yields a positive-definite covariance")
    return best


def hyper_grid(signal_variances, length_scales, noise_variances) -> list[GpHyperparams]:
    return [
        GpHyperparams(s, l, n)
        for s, l, n in itertools.product(signal_variances, length_scales, noise_variances)
    ]


def is_diagonally_dominant(K) -> bool:
    """Check ``K_ii >= (sqrt(m - 1) + 1) * sum_{j != i} K_ij`` for every row."""
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise InputError(f"covariance matrix must be square, got shape {K.shape}")
    m = K.shape[0]
    if not np.allclose(K, K.T, rtol=0.0, atol=1e-10):
        raise InputError("covariance matrix is not symmetric")
    if m <= 1:
        return True
    diag = np.diag(K)
    off = K.sum(axis=1) - diag
    return bool(np.all(diag >= (math.sqrt(m - 1) + 1.0) * off))
