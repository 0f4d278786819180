"""Simulation study: synthetic regression data, per-repetition rule runs and MSE curves.

Every (n, rep) cell derives its own generator from ``SeedSequence([master_seed, n, rep])``,
so cells can run in any order or in parallel and still produce the same numbers.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from kgd.config import ExperimentConfig, RuleConfig
from kgd.constants import CV_CONSTANT_FIELD, SCENARIO_G1K1, SCENARIO_G2K2
from kgd.errors import KgdConfigError, KgdError, KgdInputError
from kgd.kernels import Dataset, KernelKind, KernelSpec, as_points, build_kernel_matrix
from kgd.spectral import KernelMatrix
from kgd.stopping_rules import (
    CvSplit,
    StoppingDecision,
    cross_validate_constant,
    estimate_noise_std,
    predict_decision,
    path_for_rule,
    resolve_beta,
    run_rule,
    shared_path,
)

_log = logging.getLogger(__name__)

SCENARIO_KERNELS: Dict[str, KernelSpec] = {
    SCENARIO_G1K1: KernelSpec(KernelKind.MIN_PLUS_ONE, 1),
    SCENARIO_G2K2: KernelSpec(KernelKind.WENDLAND_G3, 3),
}

# extra SeedSequence word for the hold-out split, so it never shares a stream with the data
_HOLDOUT_STREAM = 1


@dataclass(frozen=True)
class RepOutcome:
    rule: str
    n: int
    rep: int
    t_hat: Optional[int] = None
    test_mse: Optional[float] = None
    oracle_distance: Optional[float] = None
    truncated: bool = False
    constant: Optional[float] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass(frozen=True)
class MseCurvePoint:
    n: int
    rep_count: int
    mean_mse: float
    std_mse: float
    mean_t_hat: float
    truncated_count: int


@dataclass(frozen=True)
class MseCurve:
    scenario: str
    rule_name: str
    points: tuple[MseCurvePoint, ...]


def scenario_kernel(scenario: str) -> KernelSpec:
    try:
        return SCENARIO_KERNELS[scenario.upper()]
    except KeyError:
        raise KgdInputError(f"unknown scenario '{scenario}' (expected one of {', '.join(SCENARIO_KERNELS)})") from None


def target_values(scenario: str, points) -> np.ndarray:
    """g1 (tent on [0, 1]) for G1K1, the radial g2 for G2K2, evaluated at each point."""
    spec = scenario_kernel(scenario)
    x = as_points(points, spec.input_dim)
    if spec.input_dim == 1:
        u = x[:, 0]
        return np.where(u <= 0.5, u, 1.0 - u)
    r = np.sqrt(np.sum(x * x, axis=1))
    return np.where(r < 1.0, (1.0 - r) ** 6 * (35.0 * r * r + 18.0 * r + 3.0), 0.0)


def target_value(scenario: str, x) -> float:
    return float(target_values(scenario, x)[0])


def generate_data(config: ExperimentConfig, n: int, rep_seed: int) -> tuple[Dataset, Dataset, np.ndarray]:
    """Training set with Gaussian noise, noiseless test set, and f_rho at the training inputs.

    Draw order from the cell generator: training inputs, noise, test inputs.
    """
    if n < 10:
        raise KgdInputError(f"simulation needs n >= 10, got {n}")
    dim = config.input_dim
    rng = np.random.default_rng(np.random.SeedSequence([config.master_seed, n, rep_seed]))
    x_train = rng.random((n, dim))
    noise = rng.normal(0.0, config.noise_std, size=n)
    m = max(1, int(math.floor(config.test_fraction * n)))
    x_test = rng.random((m, dim))
    f_rho = target_values(config.scenario, x_train)
    train = Dataset(inputs=x_train, outputs=f_rho + noise)
    test = Dataset(inputs=x_test, outputs=target_values(config.scenario, x_test))
    return train, test, f_rho


def _holdout_seed(config: ExperimentConfig, n: int, rep: int) -> int:
    ss = np.random.SeedSequence([config.master_seed, n, rep, _HOLDOUT_STREAM])
    return int(ss.generate_state(1)[0])


def _score(
    decision: StoppingDecision,
    spec: KernelSpec,
    train: Dataset,
    test: Dataset,
    matrix: KernelMatrix,
    f_rho: np.ndarray,
) -> tuple[float, float]:
    """(test MSE, ||f_t_hat - f_rho||_D) for a decision."""
    if decision.support is None:
        fitted = matrix.entries @ decision.coeffs_at_stop
    else:
        fitted = predict_decision(decision, spec, train.inputs, train.inputs)
    resid = predict_decision(decision, spec, train.inputs, test.inputs) - test.outputs
    return float(np.mean(resid * resid)), float(np.sqrt(np.mean((fitted - f_rho) ** 2)))


def run_cell(config: ExperimentConfig, n: int, rep: int) -> List[RepOutcome]:
    """All enabled rules on one repetition; a failing rule yields an outcome with ``error`` set."""
    spec = SCENARIO_KERNELS[config.scenario]
    rule_cfg: RuleConfig = config.rule_config
    try:
        train, test, f_rho = generate_data(config, n, rep)
        matrix = build_kernel_matrix(spec, train.inputs)
        # a bad step size fails every rule alike
        resolve_beta(spec, rule_cfg)
        need_tau = any(r.startswith("dsr") for r in config.rules)
        tau = estimate_noise_std(train) if need_tau else None
        # only the scanning rules read a shared path
        path = shared_path(config.rules, matrix, train.outputs, spec, rule_cfg)
    except KgdError as e:
        _log.warning("cell n=%d rep=%d failed before any rule ran: %s", n, rep, e)
        return [RepOutcome(rule=r, n=n, rep=rep, error=f"{e.prefix}: {e}") for r in config.rules]
    split = CvSplit(fraction=rule_cfg.cv_fraction)

    out: List[RepOutcome] = []
    for rule in config.rules:
        constant = None
        try:
            cfg = rule_cfg
            if rule in CV_CONSTANT_FIELD:
                constant = cross_validate_constant(rule, train, spec, rule_cfg.cv_grid, split, rule_cfg, tau=tau)
                cfg = rule_cfg.with_constant(CV_CONSTANT_FIELD[rule], constant)
            decision = run_rule(
                rule, train, matrix, spec, cfg,
                f_rho_values=f_rho, tau=tau, split_seed=_holdout_seed(config, n, rep),
                path=path_for_rule(rule, path, matrix, spec, cfg),
            )
            mse, dist = _score(decision, spec, train, test, matrix, f_rho)
        except KgdError as e:
            _log.warning("rule %s failed at n=%d rep=%d: %s", rule, n, rep, e)
            out.append(RepOutcome(rule=rule, n=n, rep=rep, constant=constant, error=f"{e.prefix}: {e}"))
            continue
        out.append(RepOutcome(
            rule=rule, n=n, rep=rep, t_hat=decision.t_hat, test_mse=mse, oracle_distance=dist,
            truncated=decision.truncated, constant=decision.constant,
        ))
    _log.info("cell n=%d rep=%d done (%d rules)", n, rep, len(out))
    return out


def run_repetitions(config: ExperimentConfig, jobs: int = 1) -> List[RepOutcome]:
    """Run every (n, rep) cell; the result is ordered by (n, rep, rule position) whatever ``jobs`` is."""
    if jobs < 1:
        raise KgdConfigError(f"jobs must be >= 1, got {jobs}")
    cells = [(n, rep) for n in config.n_grid for rep in range(config.reps)]
    by_cell: Dict[tuple[int, int], List[RepOutcome]] = {}
    if jobs == 1:
        for n, rep in cells:
            by_cell[(n, rep)] = run_cell(config, n, rep)
    else:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            futures = {executor.submit(run_cell, config, n, rep): (n, rep) for n, rep in cells}
            for future in as_completed(futures):
                by_cell[futures[future]] = future.result()
    return [o for key in cells for o in by_cell[key]]


def _curve_point(n: int, outcomes: Sequence[RepOutcome]) -> MseCurvePoint:
    ok = [o for o in outcomes if o.ok]
    if not ok:
        return MseCurvePoint(n=n, rep_count=0, mean_mse=math.nan, std_mse=math.nan, mean_t_hat=math.nan,
                             truncated_count=0)
    mse = np.array([o.test_mse for o in ok], dtype=float)
    t_hat = np.array([o.t_hat for o in ok], dtype=float)
    return MseCurvePoint(
        n=n,
        rep_count=len(ok),
        mean_mse=float(np.mean(mse)),
        std_mse=float(np.std(mse, ddof=0)),
        mean_t_hat=float(np.mean(t_hat)),
        truncated_count=sum(1 for o in ok if o.truncated),
    )


def aggregate(config: ExperimentConfig, outcomes: Sequence[RepOutcome]) -> List[MseCurve]:
    """One curve per rule (in config order) with one point per n; failed reps are left out of the means."""
    curves = []
    for rule in config.rules:
        points = tuple(
            _curve_point(n, [o for o in outcomes if o.rule == rule and o.n == n]) for n in config.n_grid
        )
        curves.append(MseCurve(scenario=config.scenario, rule_name=rule, points=points))
    return curves


def failures(outcomes: Sequence[RepOutcome]) -> List[RepOutcome]:
    return [o for o in outcomes if not o.ok]


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> List[MseCurve]:
    return aggregate(config, run_repetitions(config, jobs=jobs))
