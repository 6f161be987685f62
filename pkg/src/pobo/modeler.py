"""GP-UCB over a finite, released candidate set.

The modeler never sees the private inputs. It chooses candidates by row
index and receives noisy measurements back from the curator's oracle.
Running the loop on the original inputs gives the non-private baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, List, NamedTuple, Optional

import numpy as np
from scipy.linalg import solve_triangular

from .curator import MeasurementOracle
from .errors import InputError
from .gp import GpHyperparams, GpPosterior, as_candidates, condition, posterior_predict, se_kernel_matrix

__all__ = [
    "BoConfig",
    "LogEntry",
    "ObservationLog",
    "beta_t",
    "ucb_scores",
    "ucb_select",
    "run_bo",
]


@dataclass(frozen=True)
class BoConfig:
    horizon: int
    delta_prime: float
    exclude_observed: bool = False
    seed: Optional[int] = None

    def __post_init__(self):
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise InputError(f"horizon must be a positive integer, got {self.horizon!r}")
        if not 0.0 < self.delta_prime < 1.0:
            raise InputError(f"delta_prime must lie in (0, 1), got {self.delta_prime!r}")


class LogEntry(NamedTuple):
    t: int
    row_index: int
    beta_t: float
    y_t: float


@dataclass
class ObservationLog:
    entries: List[LogEntry] = field(default_factory=list)

    def append(self, t: int, row_index: int, beta: float, y: float) -> None:
        if t != len(self.entries) + 1:
            raise InputError(f"log entries must be consecutive from t=1, got t={t}")
        if self.entries and beta < self.entries[-1].beta_t:
            raise InputError("beta_t must be non-decreasing")
        self.entries.append(LogEntry(int(t), int(row_index), float(beta), float(y)))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def row_indices(self) -> np.ndarray:
        return np.array([e.row_index for e in self.entries], dtype=int)

    @property
    def observations(self) -> np.ndarray:
        return np.array([e.y_t for e in self.entries], dtype=float)

    @property
    def betas(self) -> np.ndarray:
        return np.array([e.beta_t for e in self.entries], dtype=float)


def beta_t(n: int, t: int, delta_prime: float) -> float:
    """Exploration weight ``2 ln(n t^2 pi^2 / (6 delta'))``."""
    if n < 1 or t < 1:
        raise InputError(f"n and t must be >= 1, got n={n}, t={t}")
    if not 0.0 < delta_prime <= math.pi**2 / 6.0:
        raise InputError(f"delta_prime out of range: {delta_prime!r}")
    return 2.0 * math.log(n * t * t * math.pi**2 / (6.0 * delta_prime))


def ucb_scores(mean: np.ndarray, variance: np.ndarray, beta: float) -> np.ndarray:
    return mean + math.sqrt(beta) * np.sqrt(variance)


def _argmax_allowed(scores: np.ndarray, excluded) -> int:
    if excluded:
        scores = scores.copy()
        scores[np.fromiter(excluded, dtype=int)] = -np.inf
        if np.all(np.isneginf(scores)):
            raise InputError("every candidate is excluded")
    # np.argmax returns the first maximizer, i.e. the lowest index on ties
    return int(np.argmax(scores))


def ucb_select(state: GpPosterior, candidates, beta: float, excluded: Iterable[int] = ()) -> int:
    """Lowest-index maximizer of ``mean + sqrt(beta) * std`` outside ``excluded``."""
    X = as_candidates(candidates)
    if beta < 0.0:
        raise InputError(f"beta must be >= 0, got {beta!r}")
    excluded = {int(i) for i in excluded}
    if any(not 0 <= i < X.shape[0] for i in excluded):
        raise InputError("excluded index out of range")
    if len(excluded) >= X.shape[0]:
        raise InputError("every candidate is excluded")
    mean, var = posterior_predict(state, X)
    return _argmax_allowed(ucb_scores(mean, var, beta), excluded)


class _IncrementalCross:
    """Cache of kernel columns ``k(X, x_i)`` for the observed rows.

    Only the cross-covariance is cached; the Cholesky factor itself is
    rebuilt from scratch by :func:`condition` after every observation.
    """

    def __init__(self, X: np.ndarray, hyper: GpHyperparams):
        self.X = X
        self.hyper = hyper
        self.columns: list[np.ndarray] = []

    def add(self, row: int) -> None:
        self.columns.append(se_kernel_matrix(self.X, self.X[row : row + 1], self.hyper)[:, 0])

    def predict(self, state: GpPosterior) -> tuple[np.ndarray, np.ndarray]:
        sv = self.hyper.signal_variance
        if state.n_observed == 0:
            n = self.X.shape[0]
            return np.zeros(n), np.full(n, sv)
        Kxt = np.column_stack(self.columns)
        mean = Kxt @ state.alpha
        v = solve_triangular(state.factor, Kxt.T, lower=True, check_finite=False)
        var = sv - np.einsum("ij,ij->j", v, v)
        return mean, np.clip(var, 0.0, sv)


def run_bo(candidates, oracle: MeasurementOracle, config: BoConfig, hyper: GpHyperparams) -> ObservationLog:
    """Run GP-UCB for ``config.horizon`` rounds against ``oracle``.

    ``candidates`` is the released matrix for the private variant or the
    original inputs for the baseline; the loop is identical. ``n`` in the
    exploration weight is always the full candidate count.
    """
    X = as_candidates(candidates)
    n = X.shape[0]
    if len(oracle) != n:
        raise InputError(f"oracle answers {len(oracle)} rows but there are {n} candidates")
    if config.exclude_observed and config.horizon > n:
        raise InputError(f"cannot make {config.horizon} distinct queries among {n} candidates")
    log = ObservationLog()
    cache = _IncrementalCross(X, hyper)
    state = condition(X, [], [], hyper)
    rows: list[int] = []
    ys: list[float] = []
    excluded: set[int] = set()
    for t in range(1, config.horizon + 1):
        beta = beta_t(n, t, config.delta_prime)
        mean, var = cache.predict(state)
        i = _argmax_allowed(ucb_scores(mean, var, beta), excluded if config.exclude_observed else ())
        y = oracle.query(i)
        log.append(t, i, beta, y)
        rows.append(i)
        ys.append(y)
        cache.add(i)
        if config.exclude_observed:
            excluded.add(i)
        state = condition(X, rows, ys, hyper)
    return log
