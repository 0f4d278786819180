#!/usr/bin/env python3
"""Command-line front end for the KGD stopping rules.

Subcommands:
  fit          run one rule on a dataset file and print t_hat with train/test diagnostics
  rules-trace  as fit, and also write the per-iteration (t, lhs, rhs) trace CSV
  bench        run the simulation study and write the MSE-curve CSV (+ manifest)

Settings come from, lowest to highest precedence: built-in defaults, --config FILE
(flat YAML), --set key=value overrides, explicit flags.

Exit codes: 0 success, 2 config error, 1 any other error.

Examples:
  python scripts/kgd_cli.py bench --scenario g1k1 --n-grid 100 --reps 1 --rules or --seed 7 --out out/bench.csv
  python scripts/kgd_cli.py fit --data data.txt --kernel k1 --rule asr
  python scripts/kgd_cli.py rules-trace --data data.txt --rule bp --trace-out trace.csv
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

PROJECT_ROOT = Path(__file__).resolve().parents[1]
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from kgd.benchmark import aggregate, failures, run_repetitions, target_values
from kgd.config import (
    ExperimentConfig,
    build_experiment_config,
    load_config_file,
    parse_override,
)
from kgd.constants import (
    CV_CONSTANT_FIELD,
    DEFAULT_BENCH_RULES,
    DEFAULT_DELTA,
    DEFAULT_GAUSSIAN_BANDWIDTH,
    DEFAULT_N_GRID,
    DEFAULT_REPS,
    RULE_ASR,
    RULE_IDS,
    RULE_ORACLE,
    SCENARIO_G1K1,
    SCENARIO_G2K2,
)
from kgd.core import bias_variance_profile, training_residual
from kgd.errors import KgdConfigError, KgdDimensionError, KgdError
from kgd.kernels import Dataset, KernelSpec, build_kernel_matrix
from kgd.results import emit_results, emit_trace, read_dataset
from kgd.spectral import effective_dim_at
from kgd.stopping_rules import (
    CvSplit,
    StoppingDecision,
    cross_validate_constant,
    estimate_noise_std,
    predict_decision,
    resolve_beta,
    run_rule,
)

_log = logging.getLogger("kgd.cli")

LOG_FORMAT = "%(levelname)-5.5s [%(name)s] %(message)s"
DEFAULT_BENCH_OUT = "results/kgd_bench.csv"
TARGETS = {"g1": SCENARIO_G1K1, "g2": SCENARIO_G2K2}


def _int_list(text: str) -> List[int]:
    try:
        return [int(p) for p in text.split(",") if p.strip()]
    except ValueError as e:
        raise KgdConfigError(f"expected a comma-separated list of integers, got '{text}'") from e


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got '{text}'") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _str_list(text: str) -> List[str]:
    return [p.strip() for p in text.split(",") if p.strip()]


def _add_common(ap: argparse.ArgumentParser) -> None:
    ap.add_argument("--config", type=Path, help="Flat YAML config file (keys as in CONFIG.example.yaml)")
    ap.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                    help="Override one config key (repeatable); wins over --config")
    ap.add_argument("--seed", type=int, default=None, help="Master seed for all randomness (default: 0)")
    ap.add_argument("--beta", type=float, default=None, help="Step size (default: 1/kappa^2)")
    ap.add_argument("--delta", type=float, default=None, help=f"Confidence level delta (default: {DEFAULT_DELTA})")
    ap.add_argument("--t-max", dest="t_max", type=int, default=None, help="Iteration cap (default: n)")
    ap.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG logging")


def _add_fit_args(ap: argparse.ArgumentParser) -> None:
    ap.add_argument("--data", type=Path, required=True, help="Dataset file: columns x_1..x_d, y (comma or whitespace)")
    ap.add_argument("--kernel", default=None,
                    help="k1 (1 + min), k2 (Wendland g3) or gaussian (default: k1 for d=1, else k2)")
    ap.add_argument("--bandwidth", type=float, default=DEFAULT_GAUSSIAN_BANDWIDTH,
                    help=f"Gaussian kernel bandwidth (default: {DEFAULT_GAUSSIAN_BANDWIDTH})")
    ap.add_argument("--rule", default=RULE_ASR, choices=RULE_IDS, help=f"Stopping rule (default: {RULE_ASR})")
    ap.add_argument("--test-data", dest="test_data", type=Path, default=None,
                    help="Optional test file in the same format; prints the test MSE")
    ap.add_argument("--target", choices=sorted(TARGETS), default=None,
                    help="Known regression function at the inputs (needed by the oracle rule and --profile)")
    ap.add_argument("--cv", action="store_true",
                    help="Select the rule constant by cross-validation on the first half of the data")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kgd_cli", description="Early stopping for kernel gradient descent")
    sub = ap.add_subparsers(dest="command", required=True)

    bench = sub.add_parser("bench", help="Run the simulation study")
    _add_common(bench)
    bench.add_argument("--scenario", default=None, help=f"G1K1 or G2K2, case-insensitive (default: {SCENARIO_G1K1})")
    bench.add_argument("--n-grid", dest="n_grid", default=None,
                       help=f"Comma list of sample sizes (default: {','.join(map(str, DEFAULT_N_GRID))})")
    bench.add_argument("--reps", type=int, default=None, help=f"Repetitions per n (default: {DEFAULT_REPS})")
    bench.add_argument("--rules", default=None,
                       help=f"Comma list from {','.join(RULE_IDS)} (default: {','.join(DEFAULT_BENCH_RULES)})")
    bench.add_argument("--jobs", type=_positive_int, default=1, help="Worker processes; results do not depend on it (default: 1)")
    bench.add_argument("--out", type=Path, default=Path(DEFAULT_BENCH_OUT),
                       help=f"MSE-curve CSV path; manifest is written next to it (default: {DEFAULT_BENCH_OUT})")
    bench.add_argument("--db-url", dest="db_url", default=None,
                       help="Also store per-repetition outcomes in this database (default: not stored)")

    fit = sub.add_parser("fit", help="Run one rule on a dataset file")
    _add_common(fit)
    _add_fit_args(fit)

    trace = sub.add_parser("rules-trace", help="As fit, plus the per-iteration trace CSV")
    _add_common(trace)
    _add_fit_args(trace)
    trace.add_argument("--trace-out", dest="trace_out", type=Path, required=True, help="Trace CSV path")
    trace.add_argument("--profile", action="store_true",
                       help="Add bias/variance columns from the noise-free iteration (needs --target)")
    return ap


def _flat_settings(args: argparse.Namespace) -> Dict[str, Any]:
    flat: Dict[str, Any] = {}
    if args.config is not None:
        flat.update(load_config_file(args.config))
    for item in args.overrides:
        key, value = parse_override(item)
        flat[key] = value
    explicit = {
        "master_seed": args.seed,
        "beta": args.beta,
        "delta": args.delta,
        "t_max": args.t_max,
    }
    if args.command == "bench":
        explicit.update({
            "scenario": args.scenario,
            "n_grid": _int_list(args.n_grid) if args.n_grid is not None else None,
            "reps": args.reps,
            "rules": _str_list(args.rules) if args.rules is not None else None,
        })
    flat.update({k: v for k, v in explicit.items() if v is not None})
    return flat


def _kernel_for(args: argparse.Namespace, data: Dataset) -> KernelSpec:
    name = args.kernel or ("k1" if data.dim == 1 else "k2")
    spec_name = name.strip().lower()
    if spec_name in ("k1", "min", "min_plus_one") and data.dim != 1:
        raise KgdDimensionError(f"kernel '{name}' is one-dimensional, dataset has {data.dim} input columns")
    return KernelSpec.from_name(name, data.dim, bandwidth=args.bandwidth)


def _print_decision(decision: StoppingDecision, spec: KernelSpec, data: Dataset, matrix,
                    test: Optional[Dataset]) -> None:
    print(f"rule: {decision.rule_name}")
    print(f"t_hat: {decision.t_hat}")
    print(f"truncated: {decision.truncated}")
    print(f"iterations_run: {decision.iterations_run}")
    if decision.constant is not None:
        print(f"constant: {decision.constant:.6g}")
    if decision.support is None:
        resid = training_residual(matrix, data.outputs, decision.coeffs_at_stop)
        train_mse = resid * resid / data.n
    else:
        diff = predict_decision(decision, spec, data.inputs, data.inputs) - data.outputs
        train_mse = float((diff * diff).mean())
    print(f"train_mse: {train_mse:.6g}")
    if data.n >= 3:
        print(f"noise_std_estimate: {estimate_noise_std(data):.6g}")
    eff = effective_dim_at(matrix.eigvals, decision.t_hat, data.n) if decision.t_hat > 0 else 0.0
    print(f"effective_dim: {eff:.6g}")
    if test is not None:
        diff = predict_decision(decision, spec, data.inputs, test.inputs) - test.outputs
        print(f"test_mse: {float((diff * diff).mean()):.6g}")


def _run_fit(args: argparse.Namespace, exp: ExperimentConfig) -> int:
    data = read_dataset(args.data)
    spec = _kernel_for(args, data)
    test = read_dataset(args.test_data) if args.test_data is not None else None
    if test is not None and test.dim != data.dim:
        raise KgdDimensionError(f"test data has {test.dim} input columns, training data has {data.dim}")
    needs_target = args.rule == RULE_ORACLE or getattr(args, "profile", False)
    if needs_target and args.target is None:
        raise KgdConfigError(f"--target is required for rule '{args.rule}'" if args.rule == RULE_ORACLE
                             else "--profile needs --target")
    f_rho = target_values(TARGETS[args.target], data.inputs) if args.target is not None else None

    cfg = exp.rule_config
    if args.cv:
        if args.rule not in CV_CONSTANT_FIELD:
            raise KgdConfigError(f"rule '{args.rule}' has no constant to cross-validate")
        c = cross_validate_constant(args.rule, data, spec, cfg.cv_grid, CvSplit(fraction=cfg.cv_fraction), cfg)
        cfg = cfg.with_constant(CV_CONSTANT_FIELD[args.rule], c)
        print(f"cv_{CV_CONSTANT_FIELD[args.rule]}: {c:.6g}")

    matrix = build_kernel_matrix(spec, data.inputs)
    decision = run_rule(args.rule, data, matrix, spec, cfg, f_rho_values=f_rho, split_seed=exp.master_seed)
    _print_decision(decision, spec, data, matrix, test)

    if args.command == "rules-trace":
        profile = None
        if args.profile:
            t_last = max(p.t for p in decision.trace)
            profile = bias_variance_profile(matrix, data.outputs, f_rho, resolve_beta(spec, cfg), t_last)
        emit_trace(decision, args.trace_out, profile)
        print(f"trace: {args.trace_out}")
    return 0


def _run_bench(args: argparse.Namespace, exp: ExperimentConfig) -> int:
    outcomes = run_repetitions(exp, jobs=args.jobs)
    curves = aggregate(exp, outcomes)
    emit_results(curves, args.out, exp, outcomes)
    failed = failures(outcomes)
    print(f"Wrote {sum(len(c.points) for c in curves)} rows to {args.out}")
    if failed:
        print(f"{len(failed)} rule runs failed; see the manifest for details")
    if args.db_url:
        from db.session import get_session, reconfigure, resolve_db_url
        from kgd.store import record_run

        reconfigure(resolve_db_url(args.db_url))
        with get_session() as session:
            run_id = record_run(exp, outcomes, session)
        print(f"Stored run {run_id} ({len(outcomes)} outcomes)")
    return 0


def run_cli(argv: List[str]) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr)
    try:
        exp = build_experiment_config(_flat_settings(args))
        if args.command == "bench":
            return _run_bench(args, exp)
        return _run_fit(args, exp)
    except KgdConfigError as e:
        print(f"{e.prefix}: {e}", file=sys.stderr)
        return 2
    except KgdError as e:
        _log.debug("command failed", exc_info=True)
        print(f"{e.prefix}: {e}", file=sys.stderr)
        return 1


def main(argv: Optional[List[str]] = None) -> int:
    return run_cli(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    raise SystemExit(main(sys.argv[1:]))
