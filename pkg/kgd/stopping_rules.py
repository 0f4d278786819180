"""Stopping rules for kernel gradient descent.

Every rule maps (dataset, kernel matrix, kernel spec, rule config) to a
:class:`StoppingDecision`. Rules that scan a range of iteration counts accept a
precomputed :class:`~kgd.core.KgdPath` through ``path=`` so one trajectory can be shared
between several rules and several candidate constants.

Rule ids (see :mod:`kgd.constants`): ``asr``/``asr-theory`` adaptive stopping,
``or`` oracle, ``ho`` hold-out, ``bp`` balancing principle, ``lp`` Lepskii principle,
``dsr1``/``dsr2`` local Rademacher rule with a cross-validated / fixed constant.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from kgd.config import RuleConfig
from kgd.constants import (
    CV_CONSTANT_FIELD,
    DEFAULT_C_DSR,
    DEFAULT_CV_FRACTION,
    RULE_ASR,
    RULE_ASR_THEORY,
    RULE_BALANCING,
    RULE_DSR_CV,
    RULE_DSR_FIXED,
    RULE_HOLDOUT,
    RULE_IDS,
    RULE_LEPSKII,
    RULE_ORACLE,
)
from kgd.core import (
    KgdPath,
    check_step_size,
    default_step_size,
    increment_norms,
    kgd_coeffs_at,
    kgd_iterates,
    predict_many,
    resolvent_norm_sq,
    run_kgd_path,
)
from kgd.errors import KgdDimensionError, KgdError, KgdInputError, LepskiiGridEmptyError
from kgd.kernels import Dataset, KernelSpec, as_points, build_kernel_matrix, kernel_block, kappa_sq
from kgd.spectral import KernelMatrix, effective_dim_at, local_rademacher

_log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TracePoint:
    t: int
    lhs: float
    rhs: float
    u_stat: Optional[float] = None


@dataclass(frozen=True, eq=False)
class StoppingDecision:
    """Outcome of one rule on one dataset.

    ``support`` holds the indices of the training points ``coeffs_at_stop`` expands over;
    None means all of them (only the hold-out rule trains on a subset).
    """

    rule_name: str
    t_hat: int
    trace: tuple[TracePoint, ...]
    coeffs_at_stop: np.ndarray
    truncated: bool = False
    iterations_run: int = 0
    support: Optional[np.ndarray] = None
    constant: Optional[float] = None


@dataclass(frozen=True)
class CvSplit:
    """Constant-selection split: the first ``floor(fraction * n)`` points (or a seeded
    permutation of them when ``seed`` is set) are fitted, the rest are held out."""

    fraction: float = DEFAULT_CV_FRACTION
    seed: Optional[int] = None

    def indices(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        if not (0.0 < self.fraction < 1.0):
            raise KgdInputError(f"CV fraction must lie in (0, 1), got {self.fraction}")
        m = int(math.floor(self.fraction * n))
        if m < 1 or m >= n:
            raise KgdInputError(f"CV split of n={n} at fraction {self.fraction} leaves an empty side")
        order = np.arange(n) if self.seed is None else np.random.default_rng(self.seed).permutation(n)
        return order[:m], order[m:]


# ---------------------------------------------------------------------------
# thresholds
# ---------------------------------------------------------------------------

def _ab_terms(t, n, eff_dim):
    t = np.asarray(t, dtype=float)
    root_n_eff = np.sqrt(np.maximum(np.asarray(eff_dim, dtype=float), 1.0))
    growth = 1.0 + 8.0 * np.sqrt(t / n)
    a = np.sqrt(t) / n + root_n_eff * growth / math.sqrt(n)
    b = np.sqrt(t) / n + root_n_eff / math.sqrt(n)
    return a, b, growth


def w_prime(t, n: int, eff_dim):
    """Constant-free threshold W'_{D,t}; accepts scalars or arrays for ``t`` and ``eff_dim``."""
    if np.any(np.asarray(t) < 1) or n < 1:
        raise KgdInputError("w_prime needs t >= 1 and n >= 1")
    a, b, growth = _ab_terms(t, n, eff_dim)
    out = a * (1.0 + np.sqrt(t) * b * growth)
    return float(out) if np.ndim(out) == 0 else out


def w_full(t, n: int, eff_dim, kappa: float, m_noise: float, gamma_noise: float):
    """Threshold with the explicit noise constants M and gamma of the moment condition."""
    if np.any(np.asarray(t) < 1) or n < 1:
        raise KgdInputError("w_full needs t >= 1 and n >= 1")
    a, b, growth = _ab_terms(t, n, eff_dim)
    sqrt2 = math.sqrt(2.0)
    inner = sqrt2 + 2.0 * sqrt2 * (kappa ** 2 + kappa) * np.sqrt(t) * b * growth
    out = 2.0 * (kappa * m_noise + gamma_noise) * a * inner
    return float(out) if np.ndim(out) == 0 else out


def u_statistic(t, n: int, eff_dim, kappa: float):
    """sqrt2 + 2 sqrt2 (kappa^2 + kappa) (t/n + sqrt(t) sqrt(max(N, 1)) (1 + 8 sqrt(t/n)) / sqrt(n))."""
    if np.any(np.asarray(t) < 1) or n < 1:
        raise KgdInputError("u_statistic needs t >= 1 and n >= 1")
    t_arr = np.asarray(t, dtype=float)
    root_n_eff = np.sqrt(np.maximum(np.asarray(eff_dim, dtype=float), 1.0))
    tail = t_arr / n + np.sqrt(t_arr) * root_n_eff * (1.0 + 8.0 * np.sqrt(t_arr / n)) / math.sqrt(n)
    sqrt2 = math.sqrt(2.0)
    out = sqrt2 + 2.0 * sqrt2 * (kappa ** 2 + kappa) * tail
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# shared plumbing
# ---------------------------------------------------------------------------

def _check_inputs(dataset: Dataset, matrix: Optional[KernelMatrix], spec: KernelSpec) -> None:
    if dataset.dim != spec.input_dim:
        raise KgdDimensionError(f"dataset has dimension {dataset.dim}, kernel expects {spec.input_dim}")
    if matrix is not None and matrix.n != dataset.n:
        raise KgdInputError(f"kernel matrix is {matrix.n}x{matrix.n} for a dataset of {dataset.n} points")


def resolve_beta(spec: KernelSpec, config: RuleConfig) -> float:
    beta = default_step_size(spec) if config.beta is None else float(config.beta)
    check_step_size(beta, kappa_sq(spec))
    return beta


def _path_for(matrix: KernelMatrix, y: np.ndarray, beta: float, t_last: int, path: Optional[KgdPath]) -> KgdPath:
    if path is None:
        return run_kgd_path(matrix, y, beta, t_last)
    if path.coeffs.shape[1] != matrix.n:
        raise KgdInputError(f"path has {path.coeffs.shape[1]} coefficients, kernel matrix is {matrix.n}x{matrix.n}")
    if path.t_last < t_last:
        raise KgdInputError(f"path stops at t={path.t_last}, rule needs t={t_last}")
    if not math.isclose(path.beta, beta, rel_tol=1e-12):
        raise KgdInputError(f"path was run with beta={path.beta}, rule uses beta={beta}")
    return path


def _d_norms(fitted: np.ndarray, ref: np.ndarray, n: int) -> np.ndarray:
    diff = fitted - ref[None, :]
    return np.sqrt(np.sum(diff * diff, axis=1) / n)


def _finish(rule: str, t_hat: int, truncated: bool, trace: list[TracePoint], coeffs: np.ndarray, **kw) -> StoppingDecision:
    if truncated:
        _log.warning("%s reached t_max=%d without firing; returning the last iterate", rule, t_hat)
    else:
        _log.debug("%s stopped at t=%d", rule, t_hat)
    return StoppingDecision(
        rule_name=rule, t_hat=int(t_hat), trace=tuple(trace), coeffs_at_stop=np.array(coeffs, dtype=float),
        truncated=truncated, **kw,
    )


# ---------------------------------------------------------------------------
# adaptive stopping rule
# ---------------------------------------------------------------------------

def asr_stop(
    dataset: Dataset,
    matrix: KernelMatrix,
    spec: KernelSpec,
    config: RuleConfig,
    *,
    variant: Optional[str] = None,
    path: Optional[KgdPath] = None,
) -> StoppingDecision:
    """First t >= 1 with ||f_{t+1} - f_t||_D + t^{-1/2} ||f_{t+1} - f_t||_K <= threshold(t).

    The practical variant uses 4 C_cv (1 + beta) W'_{D,t} / t; the theory variant uses
    4 (1 + beta) W_{D,t} log^4(16/delta) / t with M = 3 tau_hat and gamma = tau_hat unless
    set in ``config``. Without ``path`` the recursion is stepped only as far as needed.
    """
    _check_inputs(dataset, matrix, spec)
    variant = variant or config.asr_variant
    if variant not in ("practical", "theory"):
        raise KgdInputError(f"unknown ASR variant '{variant}'")
    n = dataset.n
    y = dataset.outputs
    beta = resolve_beta(spec, config)
    t_max = config.resolved_t_max(n)
    rule = RULE_ASR_THEORY if variant == "theory" else RULE_ASR

    if variant == "theory":
        kappa = math.sqrt(kappa_sq(spec))
        tau = estimate_noise_std(dataset) if (config.m_noise is None or config.gamma_noise is None) else 0.0
        m_noise = config.m_noise if config.m_noise is not None else 3.0 * tau
        gamma_noise = config.gamma_noise if config.gamma_noise is not None else tau
        log_factor = math.log(16.0 / config.delta) ** 4
        _log.debug("asr-theory constants: kappa=%.4g M=%.4g gamma=%.4g", kappa, m_noise, gamma_noise)

    if path is not None:
        path = _path_for(matrix, y, beta, t_max + 1, path)
    else:
        iterates = kgd_iterates(matrix, y, beta)
        next(iterates)
        state = next(iterates)

    trace: list[TracePoint] = []
    for t in range(1, t_max + 1):
        if path is not None:
            cur, nxt = path.coeffs[t], path.coeffs[t + 1]
        else:
            nxt_state = next(iterates)
            cur, nxt = state.coeffs, nxt_state.coeffs
        norms = increment_norms(cur, nxt, matrix, n)
        lhs = norms.d_norm + norms.k_norm / math.sqrt(t)
        eff = effective_dim_at(matrix.eigvals, t, n)
        if variant == "theory":
            rhs = 4.0 * (1.0 + beta) * w_full(t, n, eff, kappa, m_noise, gamma_noise) / t * log_factor
            trace.append(TracePoint(t, lhs, rhs, u_stat=u_statistic(t, n, eff, kappa)))
        else:
            rhs = 4.0 * config.c_cv * (1.0 + beta) * w_prime(t, n, eff) / t
            trace.append(TracePoint(t, lhs, rhs))
        if lhs <= rhs:
            return _finish(rule, t, False, trace, cur, iterations_run=t + 1,
                           constant=None if variant == "theory" else config.c_cv)
        if path is None:
            state = nxt_state

    # cur is c_{t_max} after the last pass
    return _finish(rule, t_max, True, trace, cur, iterations_run=t_max + 1,
                   constant=None if variant == "theory" else config.c_cv)


# ---------------------------------------------------------------------------
# comparison rules
# ---------------------------------------------------------------------------

def oracle_stop(
    dataset: Dataset,
    matrix: KernelMatrix,
    spec: KernelSpec,
    f_rho_values,
    config: RuleConfig,
    *,
    path: Optional[KgdPath] = None,
) -> StoppingDecision:
    """argmin over t = 0..t_max of ||f_t - f_rho||_D^2; needs the true regression values.

    With ``path`` the errors are read from the shared snapshots; without it the recursion is
    stepped to t_max keeping only the best iterate.
    """
    _check_inputs(dataset, matrix, spec)
    f_rho = np.asarray(f_rho_values, dtype=float).reshape(-1)
    if f_rho.shape[0] != dataset.n:
        raise KgdInputError(f"f_rho has {f_rho.shape[0]} values for {dataset.n} training points")
    n = dataset.n
    beta = resolve_beta(spec, config)
    t_max = config.resolved_t_max(n)
    if path is not None:
        path = _path_for(matrix, dataset.outputs, beta, t_max, path)
        errors = _d_norms(path.fitted[: t_max + 1], f_rho, n) ** 2
        t_hat = int(np.argmin(errors))
        best = path.coeffs[t_hat]
    else:
        errors = np.empty(t_max + 1)
        t_hat, best = 0, None
        for state in kgd_iterates(matrix, dataset.outputs, beta):
            errors[state.t] = _d_norms(state.fitted[None, :], f_rho, n)[0] ** 2
            if best is None or errors[state.t] < errors[t_hat]:
                t_hat, best = state.t, state.coeffs
            if state.t == t_max:
                break
    trace = [TracePoint(t, float(e), math.nan) for t, e in enumerate(errors)]
    return _finish(RULE_ORACLE, t_hat, False, trace, best, iterations_run=t_max)


def holdout_split(n: int, split_seed: Optional[int]) -> tuple[np.ndarray, np.ndarray]:
    if n < 2:
        raise KgdInputError(f"hold-out needs at least 2 samples, got {n}")
    perm = np.random.default_rng(split_seed).permutation(n)
    return perm[: n // 2], perm[n // 2:]


def holdout_stop(
    dataset: Dataset,
    spec: KernelSpec,
    config: RuleConfig,
    split_seed: Optional[int],
) -> StoppingDecision:
    """Train on a random half D_tr, pick t in 0..t_max minimising the MSE on the other half.

    The validation error is scored as the recursion advances; only the best iterate is kept.
    """
    _check_inputs(dataset, None, spec)
    tr, vl = holdout_split(dataset.n, split_seed)
    train = dataset.subset(tr)
    beta = resolve_beta(spec, config)
    t_max = config.resolved_t_max(dataset.n)
    matrix = build_kernel_matrix(spec, train.inputs)
    cross = kernel_block(spec, dataset.inputs[vl], train.inputs)
    y_vl = dataset.outputs[vl]
    mse = np.empty(t_max + 1)
    t_hat, best = 0, None
    for state in kgd_iterates(matrix, train.outputs, beta):
        resid = cross @ state.coeffs - y_vl
        mse[state.t] = float(np.mean(resid * resid))
        if best is None or mse[state.t] < mse[t_hat]:
            t_hat, best = state.t, state.coeffs
        if state.t == t_max:
            break
    trace = [TracePoint(t, float(e), math.nan) for t, e in enumerate(mse)]
    return _finish(RULE_HOLDOUT, t_hat, False, trace, best, iterations_run=t_max, support=tr)


def bp_stop(
    dataset: Dataset,
    matrix: KernelMatrix,
    spec: KernelSpec,
    config: RuleConfig,
    *,
    path: Optional[KgdPath] = None,
) -> StoppingDecision:
    """Smallest t with ||f_{t'} - f_t||_D <= C_BP W'_{D,t'} for every t' in t+1..t_max.

    The trace records, per candidate t, the largest ratio ||f_{t'} - f_t||_D / W'_{D,t'}
    against C_BP. t_max is capped at n.
    """
    _check_inputs(dataset, matrix, spec)
    n = dataset.n
    beta = resolve_beta(spec, config)
    t_max = config.resolved_t_max(n)
    if t_max > n:
        _log.debug("bp_stop: capping t_max=%d at n=%d", t_max, n)
        t_max = n
    path = _path_for(matrix, dataset.outputs, beta, t_max, path)
    w = w_prime(np.arange(1, t_max + 1), n, effective_dim_at(matrix.eigvals, np.arange(1, t_max + 1), n))

    trace: list[TracePoint] = []
    for t in range(0, t_max):
        dist = _d_norms(path.fitted[t + 1: t_max + 1], path.fitted[t], n)
        ok = bool(np.all(dist <= config.c_bp * w[t:]))
        trace.append(TracePoint(t, float(np.max(dist / w[t:])), config.c_bp))
        if ok:
            return _finish(RULE_BALANCING, t, False, trace, path.coeffs[t], iterations_run=t_max, constant=config.c_bp)
    trace.append(TracePoint(t_max, 0.0, config.c_bp))
    return _finish(RULE_BALANCING, t_max, True, trace, path.coeffs[t_max], iterations_run=t_max, constant=config.c_bp)


def lepskii_constant(n: int, delta: float, q: float) -> float:
    """L_{delta,q} = 2 log(8 log n / (delta log q))."""
    return 2.0 * math.log(8.0 * math.log(n) / (delta * math.log(q)))


def lepskii_grid(matrix: KernelMatrix, spec: KernelSpec, config: RuleConfig) -> list[int]:
    """Integer candidates ceil(q^i / kappa^2), i = 0, 1, ..., that pass the cap, sorted and unique.

    The cap t <= max(n / (100 kappa^2 L^2), n / (3 kappa^2 (N_D(1/t) + 1))) is applied to the raw
    grid value; its right side does not grow with t, so the scan stops at the first failure.
    """
    n = matrix.n
    if n < 3:
        raise KgdInputError(f"the Lepskii rule needs n >= 3, got {n}")
    k2 = kappa_sq(spec)
    t_max = config.resolved_t_max(n)
    cap_fixed = n / (100.0 * k2 * lepskii_constant(n, config.delta, config.q) ** 2)
    out: list[int] = []
    i = 0
    while True:
        raw = config.q ** i / k2
        cap = max(cap_fixed, n / (3.0 * k2 * (effective_dim_at(matrix.eigvals, raw, n) + 1.0)))
        t = max(1, math.ceil(raw))
        if raw > cap or t > t_max:
            break
        if not out or out[-1] != t:
            out.append(t)
        i += 1
    if not out:
        raise LepskiiGridEmptyError(
            f"Lepskii cap removed every grid value (n={n}, q={config.q}, delta={config.delta}, kappa^2={k2})"
        )
    return out


def lp_stop(
    dataset: Dataset,
    matrix: KernelMatrix,
    spec: KernelSpec,
    config: RuleConfig,
    *,
    path: Optional[KgdPath] = None,
) -> StoppingDecision:
    """Smallest grid t with, for all larger grid t',
    sqrt(||f_{t'} - f_t||_D^2 + ||f_{t'} - f_t||_K^2 / t') <= C_LP (N_D(1/t') + 1) / sqrt(n).

    The trace records the largest ratio of the two sides against C_LP.
    """
    _check_inputs(dataset, matrix, spec)
    n = dataset.n
    beta = resolve_beta(spec, config)
    grid = lepskii_grid(matrix, spec, config)
    path = _path_for(matrix, dataset.outputs, beta, grid[-1], path)
    # t'^{-1/2} W*_{D,t'} = (N_D(1/t') + 1) / sqrt(n)
    scale = [(effective_dim_at(matrix.eigvals, tp, n) + 1.0) / math.sqrt(n) for tp in grid]

    trace: list[TracePoint] = []
    for i, t in enumerate(grid):
        worst = 0.0
        ok = True
        for j in range(i + 1, len(grid)):
            tp = grid[j]
            lhs = math.sqrt(max(resolvent_norm_sq(matrix, path.coeffs[tp] - path.coeffs[t], 1.0 / tp), 0.0))
            worst = max(worst, lhs / scale[j])
            if lhs > config.c_lp * scale[j]:
                ok = False
        trace.append(TracePoint(t, worst, config.c_lp))
        if ok:
            return _finish(RULE_LEPSKII, t, False, trace, path.coeffs[t], iterations_run=grid[-1], constant=config.c_lp)
    raise AssertionError("the last grid point always satisfies the Lepskii condition")


def dsr_stop(
    dataset: Dataset,
    matrix: KernelMatrix,
    spec: KernelSpec,
    config: RuleConfig,
    tau: float,
    *,
    rule_name: str = RULE_DSR_CV,
    path: Optional[KgdPath] = None,
) -> StoppingDecision:
    """First t >= 1 with R_hat(1 / sqrt(t beta)) > C_DSR / (tau t beta).

    The decision only needs the spectrum; the recursion is stepped to t_hat afterwards.
    """
    _check_inputs(dataset, matrix, spec)
    if not (tau > 0 and math.isfinite(tau)):
        raise KgdInputError(f"noise level tau must be positive, got {tau}")
    n = dataset.n
    beta = resolve_beta(spec, config)
    t_max = config.resolved_t_max(n)
    mu = matrix.normalized_eigvals
    trace: list[TracePoint] = []
    t_hat, truncated = t_max, True
    for t in range(1, t_max + 1):
        eta = t * beta
        lhs = local_rademacher(mu, 1.0 / math.sqrt(eta), n)
        rhs = config.c_dsr / (tau * eta)
        trace.append(TracePoint(t, lhs, rhs))
        if lhs > rhs:
            t_hat, truncated = t, False
            break
    if path is not None:
        coeffs = _path_for(matrix, dataset.outputs, beta, t_hat, path).coeffs[t_hat]
    else:
        coeffs = kgd_coeffs_at(matrix, dataset.outputs, beta, t_hat)
    return _finish(rule_name, t_hat, truncated, trace, coeffs, iterations_run=t_hat, constant=config.c_dsr)


# ---------------------------------------------------------------------------
# noise level and constant selection
# ---------------------------------------------------------------------------

def predict_decision(decision: StoppingDecision, spec: KernelSpec, train_inputs, points) -> np.ndarray:
    """Evaluate f_{t_hat} at ``points``, expanding over the decision's support."""
    centres = as_points(train_inputs, spec.input_dim)
    if decision.support is not None:
        centres = centres[decision.support]
    return predict_many(spec, centres, decision.coeffs_at_stop, as_points(points, spec.input_dim))


def estimate_noise_std(dataset: Dataset) -> float:
    """Difference-based noise estimate: sorted neighbours for d = 1, nearest neighbours for d > 1."""
    n = dataset.n
    if n < 3:
        raise KgdInputError(f"noise estimation needs n >= 3, got {n}")
    x, y = dataset.inputs, dataset.outputs
    if dataset.dim == 1:
        order = np.argsort(x[:, 0], kind="stable")
        diffs = np.diff(y[order])
        return float(np.sqrt(np.sum(diffs * diffs) / (2.0 * (n - 1))))
    _, idx = cKDTree(x).query(x, k=2)
    own = np.arange(n)
    # duplicated inputs can put the point itself in the second column
    nn = np.where(idx[:, 0] == own, idx[:, 1], idx[:, 0])
    diffs = y - y[nn]
    return float(np.sqrt(np.sum(diffs * diffs) / (2.0 * n)))


def run_rule(
    rule: str,
    dataset: Dataset,
    matrix: KernelMatrix,
    spec: KernelSpec,
    config: RuleConfig,
    *,
    f_rho_values=None,
    tau: Optional[float] = None,
    split_seed: Optional[int] = None,
    path: Optional[KgdPath] = None,
) -> StoppingDecision:
    """Dispatch on a rule id. ``dsr2`` always uses C_DSR = 2e."""
    if rule == RULE_ASR:
        return asr_stop(dataset, matrix, spec, config, variant="practical", path=path)
    if rule == RULE_ASR_THEORY:
        return asr_stop(dataset, matrix, spec, config, variant="theory", path=path)
    if rule == RULE_ORACLE:
        if f_rho_values is None:
            raise KgdInputError("the oracle rule needs the true regression values at the training inputs")
        return oracle_stop(dataset, matrix, spec, f_rho_values, config, path=path)
    if rule == RULE_HOLDOUT:
        return holdout_stop(dataset, spec, config, split_seed)
    if rule == RULE_BALANCING:
        return bp_stop(dataset, matrix, spec, config, path=path)
    if rule == RULE_LEPSKII:
        return lp_stop(dataset, matrix, spec, config, path=path)
    if rule in (RULE_DSR_CV, RULE_DSR_FIXED):
        if tau is None:
            tau = estimate_noise_std(dataset)
        if rule == RULE_DSR_FIXED:
            config = config.with_constant("c_dsr", DEFAULT_C_DSR)
        return dsr_stop(dataset, matrix, spec, config, tau, rule_name=rule, path=path)
    raise KgdInputError(f"unknown rule '{rule}' (expected one of {', '.join(RULE_IDS)})")


def scan_path_length(rule: str, matrix: KernelMatrix, spec: KernelSpec, config: RuleConfig) -> Optional[int]:
    """Last snapshot a rule reads from a shared path, or None for rules that step on their own.

    ASR and DSR stop the recursion as soon as they fire and hold-out trains on its own half,
    so only the scanning rules (oracle, balancing, Lepskii) read a shared path.
    """
    t_max = config.resolved_t_max(matrix.n)
    if rule == RULE_ORACLE:
        return t_max
    if rule == RULE_BALANCING:
        return min(t_max, matrix.n)
    if rule == RULE_LEPSKII:
        return lepskii_grid(matrix, spec, config)[-1]
    return None


def shared_path(
    rules: Sequence[str],
    matrix: KernelMatrix,
    y,
    spec: KernelSpec,
    config: RuleConfig,
) -> Optional[KgdPath]:
    """One path covering the scanning rules in ``rules``, capped at n snapshots.

    A scanning rule that needs more than n iterations (oracle with a large t_max) steps on
    its own instead of holding every snapshot.
    """
    lengths = []
    for rule in rules:
        try:
            need = scan_path_length(rule, matrix, spec, config)
        except KgdError:
            # the rule reports its own failure when it runs
            continue
        if need is not None and need <= matrix.n:
            lengths.append(need)
    if not lengths:
        return None
    return run_kgd_path(matrix, y, resolve_beta(spec, config), max(lengths))


def path_for_rule(
    rule: str,
    path: Optional[KgdPath],
    matrix: KernelMatrix,
    spec: KernelSpec,
    config: RuleConfig,
) -> Optional[KgdPath]:
    """``path`` when it covers what ``rule`` scans, else None."""
    if path is None:
        return None
    try:
        need = scan_path_length(rule, matrix, spec, config)
    except KgdError:
        return None
    return path if need is not None and need <= path.t_last else None


def cross_validate_constant(
    rule: str,
    dataset: Dataset,
    spec: KernelSpec,
    grid: Sequence[float],
    split: CvSplit,
    config: Optional[RuleConfig] = None,
    *,
    tau: Optional[float] = None,
) -> float:
    """Pick the rule constant from ``grid`` minimising the held-out MSE.

    The rule runs on the fitted side of ``split``; predictions are scored against the
    observed outputs of the held-out side. Constants for which the rule never fires within
    t_max are skipped unless every constant does. Ties go to the smallest constant.
    """
    if rule not in CV_CONSTANT_FIELD:
        raise KgdInputError(f"rule '{rule}' has no constant to cross-validate")
    candidates = sorted(set(float(c) for c in grid))
    if not candidates:
        raise KgdInputError("constant grid is empty")
    if any(not (c > 0) for c in candidates):
        raise KgdInputError("constant grid entries must be positive")
    config = config or RuleConfig()
    _check_inputs(dataset, None, spec)
    fit_idx, held_idx = split.indices(dataset.n)
    fit = dataset.subset(fit_idx)
    held = dataset.subset(held_idx)
    matrix = build_kernel_matrix(spec, fit.inputs)
    path = shared_path([rule], matrix, fit.outputs, spec, config)
    if rule == RULE_DSR_CV and tau is None:
        tau = estimate_noise_std(fit)
    cross = kernel_block(spec, held.inputs, fit.inputs)

    field = CV_CONSTANT_FIELD[rule]
    scored: list[tuple[float, float, bool]] = []
    for c in candidates:
        decision = run_rule(rule, fit, matrix, spec, config.with_constant(field, c), tau=tau, path=path)
        resid = cross @ decision.coeffs_at_stop - held.outputs
        mse = float(np.mean(resid * resid))
        _log.debug("cv %s: %s=%g t=%d truncated=%s held-out mse=%.6g",
                   rule, field, c, decision.t_hat, decision.truncated, mse)
        scored.append((c, mse, decision.truncated))

    pool = [s for s in scored if not s[2]] or scored
    best_c, best_mse = pool[0][0], pool[0][1]
    for c, mse, _ in pool[1:]:
        if mse < best_mse:
            best_c, best_mse = c, mse
    if len(candidates) > 1 and best_c in (candidates[0], candidates[-1]):
        _log.warning("cv %s picked %s=%g at the edge of the grid [%g, %g]; widen cv_grid",
                     rule, field, best_c, candidates[0], candidates[-1])
    return best_c
