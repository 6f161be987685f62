"""Benchmark objectives: GP sample paths on a grid and the Branin-Hoo function."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InputError, NumericError
from .gp import GpHyperparams, cholesky_with_jitter, se_kernel_matrix

__all__ = [
    "GridSpec",
    "grid_points",
    "sample_gp_on_grid",
    "branin_hoo",
    "BRANIN_BOUNDS",
    "BRANIN_MINIMUM",
]

BRANIN_BOUNDS = ((-5.0, 10.0), (0.0, 15.0))
BRANIN_MINIMUM = 0.397887357729738

# Largest grid sampled with one dense Cholesky; above this the Kronecker
# structure of the kernel on a grid is used instead.
DENSE_LIMIT = 6000


@dataclass(frozen=True)
class GridSpec:
    dims: int
    points_per_dim: int
    lower: tuple
    upper: tuple

    def __post_init__(self):
        if self.dims < 1 or self.points_per_dim < 1:
            raise InputError("dims and points_per_dim must be >= 1")
        lower = tuple(float(v) for v in np.broadcast_to(self.lower, (self.dims,)))
        upper = tuple(float(v) for v in np.broadcast_to(self.upper, (self.dims,)))
        if any(hi <= lo for lo, hi in zip(lower, upper)):
            raise InputError("each upper bound must exceed its lower bound")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if self.total < 2:
            raise InputError("a grid needs at least two points")

    @property
    def total(self) -> int:
        return self.points_per_dim**self.dims

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(lo, hi, self.points_per_dim) for lo, hi in zip(self.lower, self.upper)]


def grid_points(spec: GridSpec) -> np.ndarray:
    """All grid points, row-major (the last coordinate varies fastest)."""
    mesh = np.meshgrid(*spec.axes(), indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def _kron_sample(axes: Sequence[np.ndarray], hyper: GpHyperparams, z: np.ndarray) -> np.ndarray:
    unit = GpHyperparams(1.0, hyper.length_scale, hyper.noise_variance)
    out = z.reshape([a.shape[0] for a in axes])
    for k, axis in enumerate(axes):
        K = se_kernel_matrix(axis[:, None], axis[:, None], unit)
        K[np.diag_indices_from(K)] += 1e-10
        L, _ = cholesky_with_jitter(K, 1.0)
        out = np.moveaxis(np.tensordot(L, out, axes=(1, k)), 0, k)
    return hyper.signal_std * out.ravel()


def sample_gp_on_grid(spec: GridSpec, hyper: GpHyperparams, seed, points: np.ndarray | None = None) -> np.ndarray:
    """One joint draw of a zero-mean GP over every grid point.

    ``points`` overrides the physical coordinates (e.g. after rescaling) and
    must have one row per grid point in :func:`grid_points` order. Small
    grids use a dense Cholesky of ``K + 1e-10 I``; larger ones use the
    per-axis Kronecker factorization, which is exact for a product grid.
    """
    rng = np.random.Generator(np.random.Philox(seed))
    z = rng.standard_normal(spec.total)
    if points is None:
        points = grid_points(spec)
    points = np.asarray(points, dtype=float)
    if points.shape != (spec.total, spec.dims):
        raise InputError(f"points must have shape {(spec.total, spec.dims)}, got {points.shape}")
    if spec.total <= DENSE_LIMIT:
        K = se_kernel_matrix(points, points, hyper)
        K[np.diag_indices_from(K)] += 1e-10 * hyper.signal_variance
        try:
            L, _ = cholesky_with_jitter(K, hyper.signal_variance)
        except NumericError as exc:
            raise NumericError(f"cannot sample GP on {spec.total} grid points: {exc}") from exc
        return L @ z
    axes = _axes_of(points, spec)
    return _kron_sample(axes, hyper, z)


def _axes_of(points: np.ndarray, spec: GridSpec) -> list[np.ndarray]:
    shaped = points.reshape([spec.points_per_dim] * spec.dims + [spec.dims])
    axes = []
    for k in range(spec.dims):
        index = [0] * spec.dims
        index[k] = slice(None)
        axes.append(shaped[tuple(index) + (k,)])
    # a uniformly rescaled product grid stays a product grid
    rebuilt = np.column_stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")])
    if not np.allclose(rebuilt, points, rtol=0.0, atol=1e-9 * max(1.0, np.abs(points).max())):
        raise InputError("points do not form a product grid; dense sampling is required")
    return axes


def branin_hoo(x1, x2):
    """Standard Branin-Hoo function (to be minimized); global minimum 0.397887."""
    a = 1.0
    b = 5.1 / (4.0 * math.pi**2)
    c = 5.0 / math.pi
    r = 6.0
    s = 10.0
    t = 1.0 / (8.0 * math.pi)
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    value = a * (x2 - b * x1**2 + c * x1 - r) ** 2 + s * (1.0 - t) * np.cos(x1) + s
    return float(value) if value.ndim == 0 else value
