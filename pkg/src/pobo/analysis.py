"""Theoretical constants for the private GP-UCB guarantee and empirical checks.

Everything here is a closed-form evaluation or a brute-force scan over all
pairs of rows. ``gamma_T`` has no published constant, so the regret bound
uses the surrogate ``(ln T) ** (d + 1)`` and is meant for trends only.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy.spatial.distance import cdist

from .curator import DpParams, compute_omega
from .errors import ContractError, InputError
from .gp import GpHyperparams
from .modeler import beta_t

__all__ = [
    "GuaranteeParams",
    "TheoryConstants",
    "DistanceCheck",
    "CovarianceCheck",
    "min_projection_dim",
    "nu_from_params",
    "covariance_distortion",
    "distance_distortion",
    "variance_constant",
    "mean_constant",
    "gamma_surrogate",
    "derive_guarantee",
    "regret_bound",
    "regret_bound_value",
    "dataset_diameter",
    "check_distance_preservation",
    "check_covariance_preservation",
]

GAMMA_LABEL = "surrogate (ln T)^(d+1)"


@dataclass(frozen=True)
class GuaranteeParams:
    eps_ucb: float
    delta_ucb: float
    L: float
    diameter_ratio: float

    def __post_init__(self):
        for name in ("eps_ucb", "L", "diameter_ratio"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise InputError(f"{name} must be finite and > 0, got {value!r}")
        if not 0.0 < self.delta_ucb < 1.0:
            raise InputError(f"delta_ucb must lie in (0, 1), got {self.delta_ucb!r}")


@dataclass(frozen=True)
class TheoryConstants:
    mu: float
    nu: float
    r_min: int
    omega: float
    C: float
    C_prime: float
    C1: float
    C2: float
    gamma_T: Optional[float]
    regret_bound: Optional[float]
    # provenance
    eps_ucb: float
    delta_ucb: float
    L: float
    phi: float
    r: int
    sigma_min: float
    lifted: bool
    dim: Optional[int] = None
    T: Optional[int] = None
    gamma_label: str = GAMMA_LABEL

    def as_dict(self) -> dict:
        return asdict(self)


def _lemma_dim(n: int, mu: float, nu: float) -> int:
    return math.ceil(8.0 * math.log(n * n / mu) / nu**2)


def min_projection_dim(n: int, mu: float, nu: float) -> int:
    """Smallest ``r`` with ``r >= 8 ln(n^2 / mu) / nu^2``."""
    if n < 2:
        raise InputError(f"n must be >= 2, got {n}")
    if not 0.0 < mu < 1.0:
        raise InputError(f"mu must lie in (0, 1), got {mu!r}")
    if not 0.0 < nu < 0.5:
        raise InputError(f"nu must lie in (0, 1/2), got {nu!r}")
    return _lemma_dim(n, mu, nu)


def nu_from_params(params: GuaranteeParams) -> float:
    phi2 = params.diameter_ratio**2
    return min(params.eps_ucb / (2.0 * math.sqrt(3.0) * phi2 * params.L), 2.0 / phi2, 0.5)


def distance_distortion(sigma_min: float, omega: float) -> float:
    """``1 + omega^2 / sigma_min^2`` when lifting fired, else exactly 1."""
    if sigma_min >= omega:
        return 1.0
    if sigma_min <= 0.0:
        return math.inf
    return 1.0 + omega**2 / sigma_min**2


def covariance_distortion(nu: float, phi: float, sigma_min: float, omega: float) -> float:
    """Relative bound ``C`` on ``|k_zz' - k_xx'| / k_xx'``."""
    base = nu * phi**2
    if sigma_min >= omega:
        return base
    if sigma_min <= 0.0:
        return max(base, 1.0)
    ratio = omega**2 / sigma_min**2
    # 1 - exp(-a) written as -expm1(-a) to keep precision for small a
    return max(base, -math.expm1(-0.5 * (nu + nu * ratio + ratio) * phi**2))


def variance_constant(C: float, hyper: GpHyperparams) -> float:
    """Posterior-variance perturbation constant (C1 in the regret bound)."""
    sy2, sn2 = hyper.signal_variance, hyper.noise_variance
    return C * math.sqrt(sy2) * math.sqrt(2.0 * sy2 + sn2) * (
        math.sqrt(2.0) * (1.0 + C) ** 2 * sy2 / sn2 + (2.0 + C) * C
    )


def mean_constant(C: float, hyper: GpHyperparams, L: float) -> float:
    """Posterior-mean perturbation constant (C2 in the regret bound)."""
    return math.sqrt(2.0) * (1.0 + C) * C * hyper.signal_variance / hyper.noise_variance * L


def gamma_surrogate(T: int, dim: int) -> float:
    return math.log(T) ** (dim + 1)


def derive_guarantee(
    params: GuaranteeParams,
    n: int,
    r: int,
    dp: DpParams,
    sigma_min: float,
    hyper: GpHyperparams,
    T: Optional[int] = None,
    dim: Optional[int] = None,
) -> TheoryConstants:
    """Evaluate every constant of the regret guarantee for one configuration.

    ``gamma_T`` and the bound itself are filled in only when ``T`` and
    ``dim`` are given and no lifting took place.
    """
    if n < 2:
        raise InputError(f"n must be >= 2, got {n}")
    if not sigma_min >= 0.0:
        raise InputError(f"sigma_min must be >= 0, got {sigma_min!r}")
    mu = params.delta_ucb / 2.0
    nu = nu_from_params(params)
    omega = compute_omega(r, dp)
    phi = params.diameter_ratio
    C = covariance_distortion(nu, phi, sigma_min, omega)
    constants = TheoryConstants(
        mu=mu,
        nu=nu,
        r_min=_lemma_dim(n, mu, nu),
        omega=omega,
        C=C,
        C_prime=distance_distortion(sigma_min, omega),
        C1=variance_constant(C, hyper),
        C2=mean_constant(C, hyper, params.L),
        gamma_T=None,
        regret_bound=None,
        eps_ucb=params.eps_ucb,
        delta_ucb=params.delta_ucb,
        L=params.L,
        phi=phi,
        r=int(r),
        sigma_min=float(sigma_min),
        lifted=sigma_min < omega,
        dim=dim,
        T=T,
    )
    if T is None or dim is None:
        return constants
    gamma = gamma_surrogate(T, dim)
    bound = None if constants.lifted else regret_bound(constants, T, n, params.delta_ucb, hyper)
    return _replace(constants, gamma_T=gamma, regret_bound=bound)


def _replace(c: TheoryConstants, **changes) -> TheoryConstants:
    fields = c.as_dict()
    fields.update(changes)
    return TheoryConstants(**fields)


def regret_bound_value(eps_ucb, C1, C2, beta_T, noise_variance, gamma_T, T) -> float:
    """Closed-form simple-regret bound from already evaluated ingredients."""
    log_T = math.log(T)
    return math.sqrt(
        eps_ucb**2
        + 24.0 * (C2 + C1 * math.sqrt(beta_T)) ** 2 * log_T / T
        + 24.0 / math.log1p(1.0 / noise_variance) * beta_T * gamma_T / T
    )


def regret_bound(constants: TheoryConstants, T: int, n: int, delta_ucb: float, hyper: GpHyperparams) -> float:
    """Simple-regret bound after ``T`` rounds; only defined without lifting.

    When lifting fired, the ``eps_ucb`` term is replaced by a distortion term
    that cannot be made small, and no closed-form bound is reported.
    """
    if constants.lifted:
        raise ContractError(
            "regret bound is only defined when sigma_min >= omega; with lifted singular "
            "values the accuracy term cannot be set by the caller"
        )
    if constants.dim is None:
        raise InputError("constants carry no input dimension; pass dim to derive_guarantee")
    if T < 1:
        raise InputError(f"T must be >= 1, got {T}")
    beta = beta_t(n, T, delta_ucb / 2.0)
    gamma = gamma_surrogate(T, constants.dim)
    return regret_bound_value(constants.eps_ucb, constants.C1, constants.C2, beta, hyper.noise_variance, gamma, T)


def _row_blocks(n: int, block: int):
    for start in range(0, n, block):
        yield start, min(start + block, n)


def dataset_diameter(X, sample: Optional[int] = None, seed=None, block: int = 2048) -> float:
    """Largest pairwise Euclidean distance between rows of ``X``.

    Exact by default (blocked all-pairs scan). ``sample`` restricts the scan
    to a random subset of that many rows, which can only underestimate.
    """
    A = np.asarray(X, dtype=float)
    if sample is not None and sample < A.shape[0]:
        rng = np.random.default_rng(seed)
        A = A[rng.choice(A.shape[0], size=sample, replace=False)]
    best = 0.0
    for i0, i1 in _row_blocks(A.shape[0], block):
        d2 = cdist(A[i0:i1], A[i0:], "sqeuclidean")
        best = max(best, float(d2.max()))
    return math.sqrt(best)


class DistanceCheck(NamedTuple):
    violation_fraction: float
    worst_ratio: float
    min_ratio: float
    max_ratio: float
    n_pairs: int
    zero_pairs: int
    zero_pair_violations: int


class CovarianceCheck(NamedTuple):
    violation_fraction: float
    max_relative_error: float
    n_pairs: int


def _pair_sqdists(A: np.ndarray, B: np.ndarray, block: int = 1024):
    """Yield squared distances of each unordered pair ``i < j`` in both matrices."""
    n = A.shape[0]
    for i0, i1 in _row_blocks(n, block):
        da = cdist(A[i0:i1], A[i0:], "sqeuclidean")
        db = cdist(B[i0:i1], B[i0:], "sqeuclidean")
        rows, cols = np.triu_indices(i1 - i0, k=1, m=n - i0)
        yield da[rows, cols], db[rows, cols]


def _paired(X, Z):
    A = np.asarray(X, dtype=float)
    B = np.asarray(Z, dtype=float)
    if A.ndim != 2 or B.ndim != 2:
        raise InputError("both matrices must be 2-D")
    if A.shape[0] != B.shape[0]:
        raise InputError(f"row counts differ: {A.shape[0]} vs {B.shape[0]}")
    if A.shape[0] < 2:
        raise InputError("need at least two rows")
    return A, B


def check_distance_preservation(X_centered, Z, nu: float, C_prime: float) -> DistanceCheck:
    """Scan all pairs for ``(1-nu) dx <= dz <= (1+nu) C' dx`` on squared distances.

    Pairs of identical inputs must map to identical images; they are counted
    separately and excluded from the ratio statistics.
    """
    A, B = _paired(X_centered, Z)
    lo, hi = 1.0 - nu, (1.0 + nu) * C_prime
    scale = max(float(np.einsum("ij,ij->i", B, B).max()), 1.0)
    zero_tol = 1e-24 * scale
    n_pairs = violations = zero_pairs = zero_bad = 0
    min_ratio, max_ratio = math.inf, -math.inf
    for dx, dz in _pair_sqdists(A, B):
        n_pairs += dx.size
        zero = dx == 0.0
        nz = ~zero
        zero_pairs += int(zero.sum())
        zero_bad += int((dz[zero] > zero_tol).sum())
        ratio = dz[nz] / dx[nz]
        if ratio.size:
            min_ratio = min(min_ratio, float(ratio.min()))
            max_ratio = max(max_ratio, float(ratio.max()))
        violations += int(((ratio < lo) | (ratio > hi)).sum())
    violations += zero_bad
    if not math.isfinite(min_ratio):
        min_ratio = max_ratio = worst = 1.0
    else:
        worst = min_ratio if abs(math.log(min_ratio)) >= abs(math.log(max_ratio)) else max_ratio
    return DistanceCheck(violations / n_pairs, worst, min_ratio, max_ratio, n_pairs, zero_pairs, zero_bad)


def check_covariance_preservation(X_centered, Z, hyper: GpHyperparams, C: float, nu: Optional[float] = None) -> CovarianceCheck:
    """Scan all pairs for ``|k_zz' - k_xx'| <= C k_xx'``.

    When ``nu`` is given the precondition ``nu <= 2 / phi^2`` is enforced,
    with ``phi`` the diameter of ``X_centered`` in length-scale units.
    """
    A, B = _paired(X_centered, Z)
    if nu is not None:
        phi = dataset_diameter(A) / hyper.length_scale
        if phi > 0.0 and nu > 2.0 / phi**2:
            raise ContractError(f"covariance bound needs nu <= 2/phi^2 = {2.0 / phi**2:.6g}, got nu = {nu:.6g}")
    inv = 0.5 / hyper.length_scale**2
    n_pairs = violations = 0
    worst = 0.0
    for dx, dz in _pair_sqdists(A, B):
        # |k_z - k_x| / k_x = |exp(-(dz - dx) / 2l^2) - 1|, computed without underflow
        rel = np.abs(np.expm1(-(dz - dx) * inv))
        n_pairs += rel.size
        violations += int((rel > C).sum())
        worst = max(worst, float(rel.max()))
    return CovarianceCheck(violations / n_pairs, worst, n_pairs)
