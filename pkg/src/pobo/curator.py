"""Data-owner side of the outsourced optimization protocol.

The curator holds the private input matrix. It releases a differentially
private random projection of the centered inputs and afterwards answers
measurement queries that refer to candidates by row index only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InputError, NumericError

__all__ = [
    "DpParams",
    "InputDataset",
    "TransformedDataset",
    "MeasurementOracle",
    "center_columns",
    "compute_omega",
    "lift_singular_values",
    "singular_values",
    "dp_transform",
    "projection_matrix",
    "answer_query",
    "make_neighbor",
]


@dataclass(frozen=True)
class DpParams:
    epsilon: float
    delta: float

    def __post_init__(self):
        eps, delta = float(self.epsilon), float(self.delta)
        if not (math.isfinite(eps) and eps > 0.0):
            raise InputError(f"epsilon must be > 0, got {self.epsilon!r}")
        if not (0.0 < delta < 1.0):
            raise InputError(f"delta must lie in (0, 1), got {self.delta!r}")
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "delta", delta)


@dataclass(frozen=True)
class InputDataset:
    """The curator's private ``n x d`` matrix with optional row identifiers."""

    rows: np.ndarray
    row_ids: Optional[tuple] = None

    def __post_init__(self):
        rows = np.array(self.rows, dtype=float)
        if rows.ndim != 2:
            raise InputError(f"input dataset must be 2-D, got shape {rows.shape}")
        n, d = rows.shape
        if n < 2 or d < 1:
            raise InputError(f"input dataset needs n >= 2 and d >= 1, got {n} x {d}")
        if not np.all(np.isfinite(rows)):
            raise InputError("input dataset contains non-finite entries")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        if self.row_ids is not None:
            ids = tuple(self.row_ids)
            if len(ids) != n:
                raise InputError(f"{len(ids)} row ids for {n} rows")
            object.__setattr__(self, "row_ids", ids)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1]


@dataclass(frozen=True)
class TransformedDataset:
    """The released matrix ``Z`` together with how it was produced."""

    rows: np.ndarray
    r: int
    dp: DpParams
    omega: float
    lifted: bool
    sigma_min: float
    projection_seed: Optional[int]
    source_dim: int

    def __post_init__(self):
        if self.rows.ndim != 2 or self.rows.shape[1] != self.r or self.r < 1:
            raise InputError(f"released matrix has shape {self.rows.shape}, expected (n, {self.r})")
        if self.lifted != (self.sigma_min < self.omega):
            raise InputError("lifted flag disagrees with sigma_min < omega")

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    def metadata(self) -> dict:
        return {
            "n": self.n,
            "d": self.source_dim,
            "r": self.r,
            "epsilon": self.dp.epsilon,
            "delta": self.dp.delta,
            "omega": self.omega,
            "sigma_min": self.sigma_min,
            "lifted": self.lifted,
            "projection_seed": self.projection_seed,
        }


def _as_matrix(X) -> np.ndarray:
    if isinstance(X, InputDataset):
        return X.rows
    arr = np.asarray(X, dtype=float)
    if arr.ndim != 2:
        raise InputError(f"expected a 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError("matrix contains non-finite entries")
    return arr


def center_columns(X) -> np.ndarray:
    """Subtract the column means."""
    A = _as_matrix(X)
    return A - A.mean(axis=0, keepdims=True)


def compute_omega(r: int, dp: DpParams) -> float:
    """Singular-value threshold that the released projection must clear.

    ``16 * sqrt(r * ln(2/delta)) / epsilon * ln(16 r / delta)``.
    """
    if int(r) != r or r < 1:
        raise InputError(f"projection dimension must be a positive integer, got {r!r}")
    return 16.0 * math.sqrt(r * math.log(2.0 / dp.delta)) / dp.epsilon * math.log(16.0 * r / dp.delta)


def _thin_svd(A: np.ndarray):
    try:
        return np.linalg.svd(A, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"SVD did not converge: {exc}") from exc


def singular_values(X) -> np.ndarray:
    """The ``min(n, d)`` singular values of ``X`` in descending order."""
    try:
        return np.linalg.svd(_as_matrix(X), compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"SVD did not converge: {exc}") from exc


def lift_singular_values(Xc, omega: float) -> np.ndarray:
    """Replace every singular value ``s`` of ``Xc`` by ``sqrt(s**2 + omega**2)``.

    Singular vectors are kept, so the result has the same row and column
    spaces and its smallest singular value is at least ``omega``.
    """
    A = _as_matrix(Xc)
    if not (omega >= 0.0 and math.isfinite(omega)):
        raise InputError(f"omega must be finite and >= 0, got {omega!r}")
    U, s, Vt = _thin_svd(A)
    lifted = np.sqrt(s**2 + omega**2)
    return (U * lifted) @ Vt


def projection_matrix(d: int, r: int, seed) -> np.ndarray:
    """``d x r`` standard-normal matrix from a Philox stream keyed by ``seed``."""
    rng = np.random.Generator(np.random.Philox(seed))
    return rng.standard_normal((d, r))


def dp_transform(X, dp: DpParams, r: int, seed) -> TransformedDataset:
    """Release a private ``n x r`` random projection of ``X``.

    The inputs are centered and projected by ``M / sqrt(r)`` with ``M`` a
    ``d x r`` Gaussian matrix. If the smallest singular value of the centered
    inputs is below ``compute_omega(r, dp)`` the singular values are lifted
    first. Row ``i`` of the result is the image of row ``i`` of ``X``.
    """
    data = X if isinstance(X, InputDataset) else InputDataset(X)
    if int(r) != r or r < 1:
        raise InputError(f"projection dimension must be a positive integer, got {r!r}")
    r = int(r)
    Xc = center_columns(data)
    M = projection_matrix(data.d, r, seed)
    U, s, Vt = _thin_svd(Xc)
    sigma_min = float(s.min())
    omega = compute_omega(r, dp)
    if sigma_min >= omega:
        source = Xc
        lifted = False
    else:
        source = (U * np.sqrt(s**2 + omega**2)) @ Vt
        lifted = True
    Z = source @ M / math.sqrt(r)
    Z.setflags(write=False)
    return TransformedDataset(
        rows=Z,
        r=r,
        dp=dp,
        omega=omega,
        lifted=lifted,
        sigma_min=sigma_min,
        projection_seed=seed if seed is None else int(seed),
        source_dim=data.d,
    )


@dataclass
class MeasurementOracle:
    """Answers ``f(x_i) + noise`` for a queried row index.

    Holds a private noise stream, so one instance must not be shared
    between concurrent callers.
    """

    truth: np.ndarray
    noise_variance: float = 0.0
    rng_seed: Optional[int] = None
    _rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        self.truth = np.asarray(self.truth, dtype=float).ravel()
        if self.truth.size == 0 or not np.all(np.isfinite(self.truth)):
            raise InputError("oracle truth must be a non-empty finite vector")
        if not (self.noise_variance >= 0.0 and math.isfinite(self.noise_variance)):
            raise InputError(f"noise_variance must be >= 0, got {self.noise_variance!r}")
        self._rng = np.random.Generator(np.random.Philox(self.rng_seed))

    def __len__(self) -> int:
        return self.truth.shape[0]

    def query(self, row_index: int) -> float:
        if isinstance(row_index, bool) or int(row_index) != row_index:
            raise InputError(f"row index must be an integer, got {row_index!r}")
        i = int(row_index)
        if not 0 <= i < self.truth.shape[0]:
            raise InputError(f"row index {i} out of range [0, {self.truth.shape[0]})")
        value = float(self.truth[i])
        if self.noise_variance > 0.0:
            value += math.sqrt(self.noise_variance) * float(self._rng.standard_normal())
        return value


def answer_query(oracle: MeasurementOracle, row_index: int) -> float:
    return oracle.query(row_index)


def make_neighbor(X, row_index: int, direction: Sequence[float], magnitude: float) -> InputDataset:
    """Shift one row of ``X`` by ``magnitude * direction`` (a unit vector).

    With ``0 <= magnitude <= 1`` the result and ``X`` are neighboring
    datasets: they differ in one row by a vector of norm at most one.
    """
    data = X if isinstance(X, InputDataset) else InputDataset(X)
    u = np.asarray(direction, dtype=float).ravel()
    if u.shape != (data.d,):
        raise InputError(f"direction must have length {data.d}, got {u.shape[0]}")
    if abs(np.linalg.norm(u) - 1.0) > 1e-9:
        raise InputError(f"direction must be a unit vector, norm is {np.linalg.norm(u)!r}")
    if not 0.0 <= magnitude <= 1.0:
        raise InputError(f"magnitude must lie in [0, 1], got {magnitude!r}")
    if not 0 <= row_index < data.n:
        raise InputError(f"row index {row_index} out of range [0, {data.n})")
    rows = data.rows.copy()
    rows[row_index] = rows[row_index] + magnitude * u
    return InputDataset(rows, data.row_ids)
