"""Command-line front end.

Subcommands: transform, run, bench, sweep, check, constants. Every command
writes its outputs atomically and records the invocation and seeds in the
JSON metadata next to them. Exit status is 0 on success, 2 for usage
errors and 1 for I/O or numerical failures.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__, analysis, bench
from .curator import DpParams, InputDataset, MeasurementOracle, center_columns, dp_transform, singular_values
from .errors import InputError, PoboError
from .gp import GpHyperparams
from .io import (
    load_csv_dataset,
    load_transformed,
    read_matrix_csv,
    save_transformed,
    write_json,
    write_log_csv,
)
from .modeler import BoConfig, run_bo

SEED_ENV = "PO_BO_SEED"

EPS_HELP = (
    "DP epsilon as a raw positive real; the notation eps = exp(1.1) means --epsilon 3.004 "
    "(or use --log-epsilon 1.1)"
)


class UsageError(Exception):
    """Bad or missing command-line arguments (exit status 2)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage().strip()}")


def _env_seed() -> Optional[int]:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _seed(value: Optional[int]) -> int:
    if value is not None:
        return value
    env = _env_seed()
    if env is None:
        raise UsageError(f"a seed is required: pass --seed or set {SEED_ENV}")
    return env


def _epsilon(args) -> float:
    if getattr(args, "log_epsilon", None) is not None:
        return math.exp(args.log_epsilon)
    if args.epsilon is None:
        raise UsageError("one of --epsilon / --log-epsilon is required")
    return args.epsilon


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _hyper(text: Optional[str]) -> Optional[GpHyperparams]:
    if text is None or text == "fit":
        return None
    parts = _float_list(text)
    if len(parts) != 3:
        raise UsageError("--hyper takes 'fit' or SIGNAL_VAR,LENGTH_SCALE,NOISE_VAR")
    return GpHyperparams(*parts)


def _read_inputs(path: str, features: Optional[list[str]], target: Optional[str]):
    """Headed CSV when column names are given, otherwise a headerless numeric matrix."""
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"no such file: {p}")
    if features:
        return load_csv_dataset(p, features, target)
    if target:
        raise UsageError("--target-column needs --features")
    return InputDataset(read_matrix_csv(p)), None


def _invocation(argv: Sequence[str], **seeds) -> dict:
    return {"argv": ["pobo", *argv], "version": __version__, "seeds": seeds}


def cmd_transform(args, argv) -> int:
    seed = _seed(args.seed)
    data, _ = _read_inputs(args.input, args.features, None)
    released = dp_transform(data, DpParams(_epsilon(args), args.delta), args.r, seed)
    side = save_transformed(args.out, released, {"invocation": _invocation(argv, projection_seed=seed)})
    print(f"wrote {args.out} ({released.n} x {released.r}) and {side}; lifted={released.lifted}")
    return 0


def cmd_run(args, argv) -> int:
    seed = _seed(args.seed)
    data, targets = _read_inputs(args.input, args.features, args.target_column)
    if args.targets is not None:
        targets = read_matrix_csv(args.targets).ravel()
    if targets is None:
        raise UsageError("objective values are required: --targets FILE or --features ... --target-column NAME")
    if targets.shape[0] != data.n:
        raise InputError(f"{targets.shape[0]} targets for {data.n} input rows")
    hyper = _hyper(args.hyper)
    if hyper is None:
        cfg = bench.ExperimentConfig(objective="synthetic-gp", hyper=None, log_transform=args.log_transform)
        problem = bench._fitted_problem(data.rows, targets, cfg, {})
        data, targets, hyper = problem.X, problem.truth, problem.hyper
    proj_seed = bench.run_seed(seed, 0, "projection")
    noise_seed = bench.run_seed(seed, 0, "noise")
    oracle = MeasurementOracle(targets, hyper.noise_variance if args.noise_variance is None else args.noise_variance, noise_seed)
    config = BoConfig(args.T, args.delta_ucb / 2.0, not args.allow_repeats)
    meta = {"invocation": _invocation(argv, master_seed=seed, projection_seed=proj_seed, noise_seed=noise_seed)}
    if args.baseline:
        candidates = data.rows
        meta["arm"] = "gp-ucb"
    else:
        released = dp_transform(data, DpParams(_epsilon(args), args.delta), args.r, proj_seed)
        candidates = released.rows
        meta["arm"] = "po-gp-ucb"
        meta["transform"] = released.metadata()
    log = run_bo(candidates, oracle, config, hyper)
    trace = bench.regret_metrics(log, targets)
    meta.update(
        hyper=hyper.as_dict(),
        T=args.T,
        delta_prime=config.delta_prime,
        exclude_observed=config.exclude_observed,
        simple_regret=trace.simple,
        cumulative_regret=trace.cumulative,
        simple_regret_sigma_y=trace.simple / hyper.signal_std,
    )
    write_log_csv(args.out, log)
    write_json(Path(args.out).with_suffix(".json"), meta)
    print(f"wrote {args.out}; S_T = {trace.simple:.6g} ({trace.simple / hyper.signal_std:.4g} sigma_y)")
    return 0


def _experiment_config(args) -> bench.ExperimentConfig:
    data: dict = {}
    if args.config:
        p = Path(args.config)
        if not p.exists():
            raise FileNotFoundError(f"no such file: {p}")
        try:
            data = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise InputError(f"{p}: invalid JSON: {exc}") from exc
    objective = args.objective or data.get("objective", "synthetic-gp")
    if objective == "synthetic-gp":
        base = bench.synthetic_config(quick=args.profile == "quick").to_dict()
    elif objective == "branin":
        base = bench.branin_config().to_dict()
    else:
        # csv: fitted hyperparameters by default; path and columns come from the file or flags
        base = bench.ExperimentConfig().to_dict()
        base["hyper"] = "fit"
    base.update(data)
    overrides = {
        "objective": args.objective,
        "epsilon": math.exp(args.log_epsilon) if args.log_epsilon is not None else args.epsilon,
        "delta": args.delta,
        "r": args.r,
        "T": args.T,
        "runs": args.runs,
        "delta_ucb": args.delta_ucb,
        "csv_path": args.csv,
        "feature_columns": args.features,
        "target_column": args.target_column,
        "points_per_dim": args.points_per_dim,
    }
    if args.hyper is not None:
        overrides["hyper"] = "fit" if args.hyper == "fit" else _hyper(args.hyper).as_dict()
    if args.allow_repeats:
        overrides["exclude_observed"] = False
    base.update({k: v for k, v in overrides.items() if v is not None})
    seed = args.seed if args.seed is not None else data.get("master_seed", _env_seed())
    if seed is None:
        raise UsageError(f"a master seed is required: --seed, master_seed in the config, or {SEED_ENV}")
    base["master_seed"] = seed
    config = bench.ExperimentConfig.from_dict(base)
    if args.feasible_epsilon:
        config = bench.with_feasible_epsilon(config)
    return config


def cmd_bench(args, argv) -> int:
    config = _experiment_config(args)
    report = bench.run_experiment(config, jobs=args.jobs)
    paths = report.write(args.out, _invocation(argv, master_seed=config.master_seed))
    final = report.metadata["final"]
    print(
        f"wrote {', '.join(map(str, paths))}; S_T/sigma_y private={final['po-gp-ucb']['S_T_mean_sigma_y']:.4g} "
        f"baseline={final['gp-ucb']['S_T_mean_sigma_y']:.4g}"
    )
    return 0


def cmd_sweep(args, argv) -> int:
    config = _experiment_config(args)
    if args.log_epsilons:
        epsilons = [math.exp(v) for v in args.log_epsilons]
    elif args.epsilons:
        epsilons = args.epsilons
    else:
        epsilons = [config.epsilon]
    rs = args.rs or [config.r]
    report = bench.run_sweep(config, epsilons, rs, jobs=args.jobs)
    paths = report.write(args.out, _invocation(argv, master_seed=config.master_seed))
    print(f"wrote {', '.join(map(str, paths))} ({len(report.rows)} settings)")
    return 0


def cmd_check(args, argv) -> int:
    X = read_matrix_csv(args.x)
    Xc = center_columns(X)
    Z = read_matrix_csv(args.z)
    meta = {}
    side = Path(args.z).with_suffix(".json")
    if side.exists():
        meta = load_transformed(args.z).metadata()
    C_prime = args.c_prime
    if C_prime is None:
        if meta:
            C_prime = analysis.distance_distortion(meta["sigma_min"], meta["omega"])
        else:
            C_prime = 1.0
    out = {
        "nu": args.nu,
        "C_prime": C_prime,
        "distance": analysis.check_distance_preservation(Xc, Z, args.nu, C_prime)._asdict(),
        "invocation": _invocation(argv),
    }
    if args.length_scale is not None:
        hyper = GpHyperparams(args.signal_variance, args.length_scale, args.noise_variance)
        phi = analysis.dataset_diameter(Xc) / hyper.length_scale
        C = args.C
        if C is None:
            sigma_min = meta.get("sigma_min", float(singular_values(Xc).min()))
            omega = meta.get("omega", 0.0)
            C = analysis.covariance_distortion(args.nu, phi, sigma_min, omega)
        out["phi"] = phi
        out["C"] = C
        out["covariance"] = analysis.check_covariance_preservation(Xc, Z, hyper, C, nu=args.nu)._asdict()
    text = json.dumps(out, indent=2)
    if args.out:
        write_json(args.out, out)
    print(text)
    return 0


def cmd_constants(args, argv) -> int:
    hyper = GpHyperparams(args.signal_variance, args.length_scale, args.noise_variance)
    params = analysis.GuaranteeParams(args.eps_ucb, args.delta_ucb, args.L, args.phi)
    consts = analysis.derive_guarantee(
        params, args.n, args.r, DpParams(_epsilon(args), args.delta), args.sigma_min, hyper, T=args.T, dim=args.dim
    )
    out = consts.as_dict()
    out["invocation"] = _invocation(argv)
    if args.out:
        write_json(args.out, out)
    print(json.dumps(out, indent=2))
    return 0


def _add_dp(p, required=True):
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--epsilon", type=float, help=EPS_HELP)
    g.add_argument("--log-epsilon", type=float, help="natural log of epsilon")
    p.add_argument("--delta", type=float, default=None if not required else 1e-5, help="DP delta in (0, 1)")


def _add_experiment(p):
    p.add_argument("--config", help="JSON file mirroring ExperimentConfig; flags override it")
    p.add_argument("--objective", choices=bench.OBJECTIVES)
    p.add_argument("--profile", choices=("quick", "full"), default="quick", help="synthetic-gp grid/run preset")
    p.add_argument("--epsilon", type=float, help=EPS_HELP)
    p.add_argument("--log-epsilon", type=float, help="natural log of epsilon")
    p.add_argument("--delta", type=float)
    p.add_argument("--feasible-epsilon", action="store_true",
                   help="replace epsilon by the smallest value on a 0.1 ln-grid that avoids lifting at --r")
    p.add_argument("--r", type=int)
    p.add_argument("--T", type=int)
    p.add_argument("--runs", type=int)
    p.add_argument("--delta-ucb", type=float)
    p.add_argument("--points-per-dim", type=int)
    p.add_argument("--hyper", help="'fit' or SIGNAL_VAR,LENGTH_SCALE,NOISE_VAR")
    p.add_argument("--csv", help="dataset for --objective csv")
    p.add_argument("--features", type=lambda s: s.split(","), help="comma-separated feature columns")
    p.add_argument("--target-column")
    p.add_argument("--allow-repeats", action="store_true", help="let GP-UCB re-query observed rows")
    p.add_argument("--seed", type=int, help=f"master seed (fallback: ${SEED_ENV})")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes over runs")
    p.add_argument("--out", required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pobo", description="Privacy-preserving outsourced Bayesian optimization")
    parser.add_argument("--version", action="version", version=f"pobo {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="{transform,run,bench,sweep,check,constants}",
                                parser_class=_Parser)

    p = sub.add_parser("transform", help="release a private random projection of a CSV matrix")
    p.add_argument("--in", dest="input", required=True, help="input CSV (headerless unless --features)")
    p.add_argument("--features", type=lambda s: s.split(","), help="columns to read from a headed CSV")
    _add_dp(p)
    p.add_argument("--r", type=int, required=True, help="projection dimension")
    p.add_argument("--seed", type=int, help=f"projection seed (fallback: ${SEED_ENV})")
    p.add_argument("--out", required=True, help="output CSV; a .json sidecar is written next to it")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("run", help="one curator + modeler session")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--features", type=lambda s: s.split(","))
    p.add_argument("--target-column")
    p.add_argument("--targets", help="headerless one-column CSV of objective values")
    p.add_argument("--log-transform", action="store_true", help="log-transform targets before fitting")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--epsilon", type=float, help=EPS_HELP)
    g.add_argument("--log-epsilon", type=float)
    p.add_argument("--delta", type=float, default=1e-5)
    p.add_argument("--r", type=int, default=10)
    p.add_argument("--T", type=int, default=50)
    p.add_argument("--delta-ucb", type=float, default=0.05)
    p.add_argument("--hyper", default="fit", help="'fit' or SIGNAL_VAR,LENGTH_SCALE,NOISE_VAR")
    p.add_argument("--noise-variance", type=float, help="oracle noise (default: the GP noise variance)")
    p.add_argument("--allow-repeats", action="store_true")
    p.add_argument("--baseline", action="store_true", help="run non-private GP-UCB on the raw inputs")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="observation log CSV")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench", help="multi-run regret experiment, both arms")
    _add_experiment(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("sweep", help="final regret over a grid of r and epsilon")
    _add_experiment(p)
    p.add_argument("--epsilons", type=_float_list)
    p.add_argument("--log-epsilons", type=_float_list)
    p.add_argument("--rs", type=_int_list)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("check", help="distance / covariance preservation on an (X, Z) pair")
    p.add_argument("--x", required=True, help="headerless CSV of the original inputs")
    p.add_argument("--z", required=True, help="released CSV (sidecar used when present)")
    p.add_argument("--nu", type=float, required=True)
    p.add_argument("--c-prime", type=float)
    p.add_argument("--length-scale", type=float, help="enables the covariance check")
    p.add_argument("--signal-variance", type=float, default=1.0)
    p.add_argument("--noise-variance", type=float, default=1e-5)
    p.add_argument("--C", type=float, help="covariance distortion bound (default: derived)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("constants", help="evaluate the regret-guarantee constants")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    _add_dp(p)
    p.add_argument("--sigma-min", type=float, required=True)
    p.add_argument("--eps-ucb", type=float, default=0.1)
    p.add_argument("--delta-ucb", type=float, default=0.05)
    p.add_argument("--L", type=float, required=True)
    p.add_argument("--phi", type=float, required=True, help="diameter / length scale")
    p.add_argument("--signal-variance", type=float, default=1.0)
    p.add_argument("--length-scale", type=float, default=1.0)
    p.add_argument("--noise-variance", type=float, default=1e-5)
    p.add_argument("--T", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_constants)
    return parser


def dispatch(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args, argv)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except InputError as exc:
        print(f"pobo: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, PoboError) as exc:
        print(f"pobo: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch())
