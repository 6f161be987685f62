"""Multi-run regret experiments comparing private and non-private GP-UCB.

Each run derives independent seeds for its objective, projection matrix and
measurement noise from ``(master_seed, run)``. Both arms of a run share the
objective and the noise seed, so their difference isolates the effect of
the released projection.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import analysis
from .curator import DpParams, InputDataset, MeasurementOracle, center_columns, compute_omega, dp_transform, singular_values
from .errors import InputError, PoboError
from .gp import GpHyperparams, fit_hyperparams, hyper_grid, is_diagonally_dominant, se_kernel_matrix
from .io import load_csv_dataset, write_json, write_rows_csv
from .modeler import BoConfig, ObservationLog, run_bo
from .objectives import BRANIN_BOUNDS, GridSpec, branin_hoo, grid_points, sample_gp_on_grid

__all__ = [
    "RegretTrace",
    "ExperimentConfig",
    "Problem",
    "preprocess_inputs",
    "log_transform_targets",
    "regret_metrics",
    "build_problem",
    "fit_ard_lengthscales",
    "run_experiment",
    "run_sweep",
    "ExperimentReport",
    "SweepReport",
    "SYNTHETIC_FULL_SIGMA_MIN",
    "synthetic_config",
    "branin_config",
    "quick_eps_shift",
    "feasible_log_epsilon",
    "with_feasible_epsilon",
]

OBJECTIVES = ("synthetic-gp", "branin", "csv")
ARMS = ("po-gp-ucb", "gp-ucb")

# sigma_min of the centered, max-norm-25 100x100 synthetic grid; the quick
# profile rescales epsilon by the ratio of sigma_min values
SYNTHETIC_FULL_SIGMA_MIN = 1030.878478633848


@dataclass
class RegretTrace:
    instantaneous: np.ndarray
    cumulative: float
    simple_by_t: np.ndarray

    @property
    def simple(self) -> float:
        return float(self.simple_by_t[-1])


def regret_metrics(log: ObservationLog, truth) -> RegretTrace:
    """Instantaneous, cumulative and running simple regret against ``truth``."""
    f = np.asarray(truth, dtype=float).ravel()
    idx = log.row_indices
    if idx.size and (idx.min() < 0 or idx.max() >= f.size):
        raise InputError(f"log refers to rows outside [0, {f.size})")
    inst = f.max() - f[idx]
    simple = np.minimum.accumulate(inst) if inst.size else inst
    return RegretTrace(inst, float(inst.sum()), simple)


def log_transform_targets(y) -> np.ndarray:
    """``ln(y)`` for positive targets, otherwise ``ln(y - min(y) + 1)``."""
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0.0):
        return np.log(y - y.min() + 1.0)
    return np.log(y)


def preprocess_inputs(X, per_dim_lengthscales=None, max_norm: float = 25.0, y=None, log_transform: bool = False):
    """Divide columns by per-dimension length scales, then rescale to ``max_norm``.

    Returns ``(InputDataset, targets)``; targets are log-transformed when
    requested and passed through (or None) otherwise.
    """
    data = X if isinstance(X, InputDataset) else InputDataset(X)
    if not (max_norm > 0.0 and math.isfinite(max_norm)):
        raise InputError(f"max_norm must be > 0, got {max_norm!r}")
    A = data.rows.copy()
    if per_dim_lengthscales is not None:
        ls = np.asarray(per_dim_lengthscales, dtype=float).ravel()
        if ls.shape != (data.d,) or np.any(~(ls > 0.0)):
            raise InputError("per-dimension length scales must be d positive values")
        A = A / ls
    top = np.linalg.norm(A, axis=1).max()
    if top == 0.0:
        raise InputError("cannot rescale an all-zero dataset")
    A = A * (max_norm / top)
    targets = None
    if y is not None:
        targets = np.asarray(y, dtype=float).ravel()
        if targets.shape[0] != data.n:
            raise InputError(f"{targets.shape[0]} targets for {data.n} rows")
        if log_transform:
            targets = log_transform_targets(targets)
    return InputDataset(A, data.row_ids), targets


@dataclass(frozen=True)
class ExperimentConfig:
    objective: str = "synthetic-gp"
    hyper: Optional[GpHyperparams] = GpHyperparams(1.0, 1.25, 1e-5)
    epsilon: float = math.exp(1.1)
    delta: float = 1e-5
    r: int = 10
    T: int = 50
    runs: int = 10
    delta_ucb: float = 0.05
    master_seed: int = 0
    exclude_observed: bool = True
    max_norm: float = 25.0
    points_per_dim: int = 50
    grid_lower: float = -4.0
    grid_upper: float = 4.0
    csv_path: Optional[str] = None
    feature_columns: Optional[tuple] = None
    target_column: Optional[str] = None
    log_transform: bool = True
    fit_subsample: int = 200
    eps_ucb: float = 0.1

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise InputError(f"objective must be one of {OBJECTIVES}, got {self.objective!r}")
        if self.runs < 1 or self.T < 1 or self.r < 1:
            raise InputError("runs, T and r must be >= 1")
        if not 0.0 < self.delta_ucb < 1.0:
            raise InputError("delta_ucb must lie in (0, 1)")
        if self.points_per_dim < 2:
            raise InputError("points_per_dim must be >= 2")
        if self.objective == "csv" and not (self.csv_path and self.feature_columns and self.target_column):
            raise InputError("csv objective needs csv_path, feature_columns and target_column")
        if self.feature_columns is not None:
            object.__setattr__(self, "feature_columns", tuple(self.feature_columns))
        self.dp  # validates epsilon and delta

    @property
    def dp(self) -> DpParams:
        return DpParams(self.epsilon, self.delta)

    @property
    def delta_prime(self) -> float:
        return self.delta_ucb / 2.0

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["hyper"] = "fit" if self.hyper is None else self.hyper.as_dict()
        if self.feature_columns is not None:
            out["feature_columns"] = list(self.feature_columns)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InputError(f"unknown config field(s): {sorted(unknown)}")
        kwargs = dict(data)
        if "hyper" in kwargs:
            h = kwargs["hyper"]
            if h is None or h == "fit":
                kwargs["hyper"] = None
            elif isinstance(h, dict):
                kwargs["hyper"] = GpHyperparams(**h)
            elif not isinstance(h, GpHyperparams):
                raise InputError(f"hyper must be 'fit' or a mapping, got {h!r}")
        return cls(**kwargs)


def quick_eps_shift(points_per_dim: int, max_norm: float = 25.0) -> float:
    """``ln`` of how much smaller sigma_min is on a coarser synthetic grid than at 100x100."""
    X = _synthetic_inputs(points_per_dim, -4.0, 4.0, max_norm)
    sigma = float(singular_values(center_columns(X)).min())
    return math.log(SYNTHETIC_FULL_SIGMA_MIN * max_norm / 25.0 / sigma)


def synthetic_config(quick: bool = True, **overrides) -> ExperimentConfig:
    """Synthetic GP defaults: 50x50 grid and 10 runs quick, 100x100 and 50 runs full.

    ``overrides`` may set ``log_epsilon`` (ln eps as quoted for the 100x100 grid),
    which is shifted for the quick grid so feasibility matches full scale.
    """
    ppd = 50 if quick else 100
    log_eps = overrides.pop("log_epsilon", 1.1)
    shift = quick_eps_shift(ppd) if quick else 0.0
    base = dict(
        objective="synthetic-gp",
        hyper=GpHyperparams(1.0, 1.25, 1e-5),
        epsilon=math.exp(log_eps + shift),
        delta=1e-5,
        r=10,
        T=50,
        runs=10 if quick else 50,
        points_per_dim=ppd,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def branin_config(**overrides) -> ExperimentConfig:
    base = dict(
        objective="branin",
        hyper=None,
        epsilon=math.exp(2.3),
        delta=1e-3,
        r=10,
        T=50,
        runs=10,
        points_per_dim=31,
        log_transform=True,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def feasible_log_epsilon(sigma_min: float, r: int, delta: float, step: float = 0.1) -> float:
    """Smallest ``ln eps`` on a ``step`` grid for which ``omega <= sigma_min`` (no lifting)."""
    if not sigma_min > 0.0:
        raise InputError("sigma_min must be > 0")
    base = compute_omega(r, DpParams(1.0, delta))  # omega scales as 1/eps
    k = math.ceil(round(math.log(base / sigma_min) / step, 9))
    while compute_omega(r, DpParams(math.exp(k * step), delta)) > sigma_min:
        k += 1
    return k * step


@dataclass
class Problem:
    """A fully preprocessed benchmark instance as held by the curator."""

    X: InputDataset
    truth: np.ndarray
    hyper: GpHyperparams
    notes: dict = field(default_factory=dict)

    @property
    def sigma_y(self) -> float:
        return self.hyper.signal_std


_STREAMS = {"objective": 0, "projection": 1, "noise": 2, "fit": 3}


def run_seed(master_seed: int, run: int, stream: str) -> int:
    ss = np.random.SeedSequence(entropy=[int(master_seed), int(run), _STREAMS[stream]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _synthetic_inputs(ppd: int, lower: float, upper: float, max_norm: float) -> np.ndarray:
    spec = GridSpec(2, ppd, lower, upper)
    X, _ = preprocess_inputs(grid_points(spec), max_norm=max_norm)
    return X.rows


def _synthetic_problem(config: ExperimentConfig, run: int) -> Problem:
    """GP sample path drawn on the raw grid, inputs then rescaled to ``max_norm``.

    The rescaling multiplies every distance by the same factor, so the
    modeler's length scale is multiplied by it too; the prior over the
    rescaled inputs is then exactly the one the path was drawn from.
    """
    hyper = config.hyper if config.hyper is not None else GpHyperparams(1.0, 1.25, 1e-5)
    spec = GridSpec(2, config.points_per_dim, config.grid_lower, config.grid_upper)
    key = ("grid", spec, config.max_norm)
    if key not in _STATIC_CACHE:
        raw = grid_points(spec)
        scale = config.max_norm / np.linalg.norm(raw, axis=1).max()
        _STATIC_CACHE[key] = (InputDataset(raw * scale), scale)
    X, scale = _STATIC_CACHE[key]
    truth = sample_gp_on_grid(spec, hyper, run_seed(config.master_seed, run, "objective"))
    model_hyper = GpHyperparams(hyper.signal_variance, hyper.length_scale * scale, hyper.noise_variance)
    notes = {
        "objective": "GP sample path on the raw grid, fresh per run",
        "raw_bounds": [spec.lower, spec.upper],
        "input_scale": scale,
        "raw_hyper": hyper.as_dict(),
    }
    return Problem(X, truth, model_hyper, notes)


def default_iso_grid(X: np.ndarray, y: np.ndarray) -> list[GpHyperparams]:
    """Log-spaced grid scaled to the data: signal around var(y), length around the diameter."""
    var = float(np.var(y)) or 1.0
    diam = analysis.dataset_diameter(X) or 1.0
    return hyper_grid(
        var * np.logspace(-1, 1, 9),
        diam * np.logspace(-2.5, 0.5, 19),
        var * np.logspace(-6, -2, 5),
    )


def fit_ard_lengthscales(X, y, sweeps: int = 2, n_candidates: int = 13) -> np.ndarray:
    """Per-dimension length scales by coordinate-wise grid search on the LML.

    For a candidate vector ``ls`` the columns are divided by ``ls`` and an
    isotropic unit-length kernel is scored, maximizing over signal and noise
    variance on a small grid.
    """
    A = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    span = A.max(axis=0) - A.min(axis=0)
    span[span == 0.0] = 1.0
    var = float(np.var(y)) or 1.0
    inner = hyper_grid(var * np.logspace(-1, 1, 5), [1.0], var * np.logspace(-6, -2, 3))
    rows = np.arange(A.shape[0])
    ls = span / 4.0

    def score(candidate):
        from .gp import log_marginal_likelihood

        Xs = A / candidate
        best = fit_hyperparams(Xs, rows, y, inner)
        return log_marginal_likelihood(Xs, rows, y, best)

    for _ in range(sweeps):
        for k in range(A.shape[1]):
            options = span[k] * np.logspace(-2, 1, n_candidates)
            vals = []
            for v in options:
                trial = ls.copy()
                trial[k] = v
                try:
                    vals.append(score(trial))
                except PoboError:
                    vals.append(-math.inf)
            ls[k] = options[int(np.argmax(vals))]
    return ls


def _subsample(n: int, size: int, seed: int) -> np.ndarray:
    if n <= size:
        return np.arange(n)
    return np.sort(np.random.default_rng(seed).choice(n, size=size, replace=False))


def _fitted_problem(X_raw: np.ndarray, y_raw: np.ndarray, config: ExperimentConfig, notes: dict) -> Problem:
    fit_seed = run_seed(config.master_seed, 0, "fit")
    y = log_transform_targets(y_raw) if config.log_transform else np.asarray(y_raw, dtype=float)
    # a zero prior mean is assumed, so the curator shifts targets to zero mean;
    # regret is invariant to the shift
    y = y - y.mean()
    sub = _subsample(X_raw.shape[0], config.fit_subsample, fit_seed)
    if config.hyper is None:
        ls = fit_ard_lengthscales(X_raw[sub], y[sub])
        X, _ = preprocess_inputs(X_raw, ls, config.max_norm)
        hyper = fit_hyperparams(X.rows[sub], np.arange(sub.size), y[sub], default_iso_grid(X.rows[sub], y[sub]))
        notes.update(
            preprocessing_order="log-transform, per-dim MLE length scales, divide, max-norm, isotropic MLE refit",
            per_dim_lengthscales=ls.tolist(),
        )
    else:
        X, _ = preprocess_inputs(X_raw, None, config.max_norm)
        hyper = config.hyper
        notes.update(preprocessing_order="log-transform, max-norm (hyperparameters supplied)")
    notes["target_shift"] = "targets centered to zero mean"
    return Problem(X, y, hyper, notes)


_STATIC_CACHE: dict = {}


def build_problem(config: ExperimentConfig, run: int) -> Problem:
    """The curator's dataset and ground truth for one run."""
    if config.objective == "synthetic-gp":
        return _synthetic_problem(config, run)
    key = (
        "fitted",
        config.objective,
        config.points_per_dim,
        config.csv_path,
        config.feature_columns,
        config.target_column,
        config.log_transform,
        config.fit_subsample,
        config.max_norm,
        config.master_seed,
        config.hyper,
    )
    if key in _STATIC_CACHE:
        return _STATIC_CACHE[key]
    notes: dict = {}
    if config.objective == "branin":
        spec = GridSpec(2, config.points_per_dim, [b[0] for b in BRANIN_BOUNDS], [b[1] for b in BRANIN_BOUNDS])
        X_raw = grid_points(spec)
        # maximize the negated function
        y_raw = -branin_hoo(X_raw[:, 0], X_raw[:, 1])
        notes["objective"] = "negated Branin-Hoo on a grid"
    else:
        data, y_raw = load_csv_dataset(config.csv_path, config.feature_columns, config.target_column)
        X_raw = data.rows
        notes["objective"] = f"csv {config.csv_path}"
    problem = _fitted_problem(X_raw, y_raw, config, notes)
    _STATIC_CACHE[key] = problem
    return problem


def with_feasible_epsilon(config: ExperimentConfig, step: float = 0.1) -> ExperimentConfig:
    """``config`` with epsilon moved to the smallest grid value that avoids lifting at ``config.r``."""
    problem = build_problem(config, 0)
    sigma = float(singular_values(center_columns(problem.X.rows)).min())
    return replace(config, epsilon=math.exp(feasible_log_epsilon(sigma, config.r, config.delta, step)))


def dominance_by_iteration(X: np.ndarray, rows: Sequence[int], hyper: GpHyperparams) -> np.ndarray:
    """Whether ``K`` over the first ``t - 1`` selected inputs is diagonally dominant, for each t."""
    rows = list(rows)
    out = np.empty(len(rows), dtype=bool)
    K = se_kernel_matrix(X[rows], X[rows], hyper) if rows else np.zeros((0, 0))
    for t in range(1, len(rows) + 1):
        m = t - 1
        out[t - 1] = True if m == 0 else is_diagonally_dominant(K[:m, :m])
    return out


@dataclass
class ArmRun:
    trace: RegretTrace
    rows: np.ndarray
    meta: dict


@dataclass
class RunResult:
    run: int
    sigma_y: float
    baseline: ArmRun
    private: dict  # (r, epsilon) -> ArmRun


def _simulate_run(config: ExperimentConfig, run: int, settings: Sequence[tuple]) -> RunResult:
    try:
        problem = build_problem(config, run)
        noise_seed = run_seed(config.master_seed, run, "noise")
        proj_seed = run_seed(config.master_seed, run, "projection")
        bo = BoConfig(config.T, config.delta_prime, config.exclude_observed)

        def arm(candidates):
            oracle = MeasurementOracle(problem.truth, problem.hyper.noise_variance, noise_seed)
            log = run_bo(candidates, oracle, bo, problem.hyper)
            return log, regret_metrics(log, problem.truth)

        log, trace = arm(problem.X.rows)
        baseline = ArmRun(trace, log.row_indices, {})
        private = {}
        for r, eps in settings:
            released = dp_transform(problem.X, DpParams(eps, config.delta), r, proj_seed)
            log, trace = arm(released.rows)
            dom = dominance_by_iteration(problem.X.rows, log.row_indices, problem.hyper)
            meta = released.metadata()
            meta["dominance"] = dom
            private[(r, eps)] = ArmRun(trace, log.row_indices, meta)
        return RunResult(run, problem.sigma_y, baseline, private)
    except PoboError as exc:
        raise type(exc)(f"run {run}: {exc}") from exc


def _simulate_many(config: ExperimentConfig, settings, jobs: int) -> list[RunResult]:
    runs = range(config.runs)
    if jobs <= 1:
        return [_simulate_run(config, k, settings) for k in runs]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(_simulate_run, config, k, settings) for k in runs]
        return [f.result() for f in futures]


def _mean_stderr(values: np.ndarray, axis: int = 0):
    values = np.asarray(values, dtype=float)
    mean = values.mean(axis=axis)
    k = values.shape[axis]
    if k < 2:
        return mean, np.zeros_like(mean)
    return mean, values.std(axis=axis, ddof=1) / math.sqrt(k)


def _theory(config: ExperimentConfig, problem: Problem, meta: dict) -> dict:
    X = problem.X.rows
    Xc = center_columns(X)
    diam = analysis.dataset_diameter(Xc)
    L = float(np.abs(problem.truth).max())
    params = analysis.GuaranteeParams(config.eps_ucb, config.delta_ucb, L, diam / problem.hyper.length_scale)
    consts = analysis.derive_guarantee(
        params, X.shape[0], config.r, config.dp, meta["sigma_min"], problem.hyper, T=config.T, dim=X.shape[1]
    )
    out = {"constants": consts.as_dict(), "L_source": "max |f| over the ground truth", "diameter": diam}
    return out


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    per_run: list
    iterations: np.ndarray
    curves: dict  # arm -> {"mean", "stderr", "mean_normalized", "stderr_normalized"}
    metadata: dict

    def final(self, arm: str, normalized: bool = True) -> float:
        key = "mean_normalized" if normalized else "mean"
        return float(self.curves[arm][key][-1])

    def final_stderr(self, arm: str, normalized: bool = True) -> float:
        key = "stderr_normalized" if normalized else "stderr"
        return float(self.curves[arm][key][-1])

    def csv_rows(self, normalized: bool = False):
        mk, sk = ("mean_normalized", "stderr_normalized") if normalized else ("mean", "stderr")
        for arm in ARMS:
            for t, m, s in zip(self.iterations, self.curves[arm][mk], self.curves[arm][sk]):
                yield int(t), arm, float(m), float(s)

    def write(self, out_path, invocation: Optional[dict] = None) -> list[Path]:
        out_path = Path(out_path)
        header = ("iteration", "arm", "mean_simple_regret", "stderr")
        write_rows_csv(out_path, header, self.csv_rows())
        norm = out_path.with_name(out_path.stem + "_normalized" + out_path.suffix)
        write_rows_csv(norm, header, self.csv_rows(normalized=True))
        meta = dict(self.metadata)
        if invocation is not None:
            meta["invocation"] = invocation
        side = out_path.with_suffix(".json")
        write_json(side, meta)
        return [out_path, norm, side]


def _curves(results: list[RunResult], pick) -> dict:
    raw = np.array([pick(res).trace.simple_by_t for res in results])
    scale = np.array([res.sigma_y for res in results])[:, None]
    mean, se = _mean_stderr(raw)
    nmean, nse = _mean_stderr(raw / scale)
    return {"mean": mean, "stderr": se, "mean_normalized": nmean, "stderr_normalized": nse}


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> ExperimentReport:
    """Run both arms ``config.runs`` times and aggregate simple regret per iteration."""
    setting = (config.r, config.epsilon)
    results = _simulate_many(config, [setting], jobs)
    curves = {
        "po-gp-ucb": _curves(results, lambda res: res.private[setting]),
        "gp-ucb": _curves(results, lambda res: res.baseline),
    }
    per_run = []
    dominance = []
    for res in results:
        meta = dict(res.private[setting].meta)
        dom = meta.pop("dominance")
        dominance.append(dom)
        per_run.append(
            {
                **meta,
                "run": res.run,
                "sigma_y": res.sigma_y,
                "S_T_private": res.private[setting].trace.simple,
                "S_T_baseline": res.baseline.trace.simple,
                "R_T_private": res.private[setting].trace.cumulative,
                "R_T_baseline": res.baseline.trace.cumulative,
                "dominance_fraction": float(dom.mean()),
            }
        )
    dominance = np.array(dominance)
    problem = build_problem(config, 0)
    metadata = {
        "config": config.to_dict(),
        "hyper": problem.hyper.as_dict(),
        "problem_notes": problem.notes,
        "seeds": {
            str(k): {s: run_seed(config.master_seed, k, s) for s in ("objective", "projection", "noise")}
            for k in range(config.runs)
        },
        "runs": per_run,
        "dominance_fraction_by_iteration": dominance.mean(axis=0).tolist(),
        "dominance_fraction_overall": float(dominance.mean()),
        "final": {
            arm: {
                "S_T_mean": float(curves[arm]["mean"][-1]),
                "S_T_stderr": float(curves[arm]["stderr"][-1]),
                "S_T_mean_sigma_y": float(curves[arm]["mean_normalized"][-1]),
                "S_T_stderr_sigma_y": float(curves[arm]["stderr_normalized"][-1]),
            }
            for arm in ARMS
        },
    }
    try:
        metadata["theory"] = _theory(config, problem, per_run[0])
        if problem.X.n <= 3000:
            released = dp_transform(problem.X, config.dp, config.r, run_seed(config.master_seed, 0, "projection"))
            Xc = center_columns(problem.X)
            c = metadata["theory"]["constants"]
            metadata["theory"]["distance_check_run0"] = analysis.check_distance_preservation(
                Xc, released.rows, c["nu"], c["C_prime"]
            )._asdict()
            metadata["theory"]["covariance_check_run0"] = analysis.check_covariance_preservation(
                Xc, released.rows, problem.hyper, c["C"]
            )._asdict()
    except PoboError as exc:
        metadata["theory"] = {"error": str(exc)}
    return ExperimentReport(config, per_run, np.arange(1, config.T + 1), curves, metadata)


@dataclass
class SweepRow:
    r: int
    epsilon: float
    S_T_mean: float
    S_T_stderr: float
    lifted: str
    S_T_mean_sigma_y: float
    S_T_stderr_sigma_y: float
    per_run_sigma_y: list


@dataclass
class SweepReport:
    config: ExperimentConfig
    rows: list
    baseline: dict
    results: list = field(repr=False, default_factory=list)

    def row(self, r: int, epsilon: float) -> SweepRow:
        for row in self.rows:
            if row.r == r and math.isclose(row.epsilon, epsilon, rel_tol=1e-12):
                return row
        raise KeyError((r, epsilon))

    def write(self, out_path, invocation: Optional[dict] = None) -> list[Path]:
        out_path = Path(out_path)
        header = ("r", "epsilon", "S_T_mean", "S_T_stderr", "lifted")
        write_rows_csv(out_path, header, [(x.r, x.epsilon, x.S_T_mean, x.S_T_stderr, x.lifted) for x in self.rows])
        norm = out_path.with_name(out_path.stem + "_normalized" + out_path.suffix)
        write_rows_csv(
            norm, header, [(x.r, x.epsilon, x.S_T_mean_sigma_y, x.S_T_stderr_sigma_y, x.lifted) for x in self.rows]
        )
        meta = {
            "config": self.config.to_dict(),
            "baseline": self.baseline,
            "rows": [{k: v for k, v in asdict(x).items()} for x in self.rows],
        }
        if invocation is not None:
            meta["invocation"] = invocation
        side = out_path.with_suffix(".json")
        write_json(side, meta)
        return [out_path, norm, side]


def run_sweep(config: ExperimentConfig, epsilons: Sequence[float], rs: Sequence[int], jobs: int = 1) -> SweepReport:
    """Final simple regret of the private arm over a grid of ``(r, epsilon)``.

    Every setting reuses each run's objective, noise seed and projection seed,
    so differences between rows come from ``r`` and ``epsilon`` alone.
    """
    settings = [(int(r), float(e)) for r in rs for e in epsilons]
    if not settings:
        raise InputError("sweep needs at least one r and one epsilon")
    results = _simulate_many(config, settings, jobs)
    sig = np.array([res.sigma_y for res in results])
    rows = []
    for key in settings:
        finals = np.array([res.private[key].trace.simple for res in results])
        lifted = {bool(res.private[key].meta["lifted"]) for res in results}
        mean, se = _mean_stderr(finals)
        nmean, nse = _mean_stderr(finals / sig)
        rows.append(
            SweepRow(
                key[0],
                key[1],
                float(mean),
                float(se),
                ("true" if lifted.pop() else "false") if len(lifted) == 1 else "mixed",
                float(nmean),
                float(nse),
                (finals / sig).tolist(),
            )
        )
    base = np.array([res.baseline.trace.simple for res in results])
    bmean, bse = _mean_stderr(base)
    nbm, nbs = _mean_stderr(base / sig)
    baseline = {
        "S_T_mean": float(bmean),
        "S_T_stderr": float(bse),
        "S_T_mean_sigma_y": float(nbm),
        "S_T_stderr_sigma_y": float(nbs),
        "per_run_sigma_y": (base / sig).tolist(),
    }
    return SweepReport(config, rows, baseline, results)
