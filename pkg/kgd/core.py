"""Kernel gradient descent: the coefficient recursion and the quantities built on it.

The estimator after t steps is f_t = sum_i c^t_i K(x_i, .) with

    c_{t+1} = c_t - (beta / n) (K c_t - y),    c_0 = 0.

Production code always advances this recursion; :func:`kgd_closed_form` (the spectral
filter form) is kept as an independent check for tests.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from itertools import islice
from typing import Iterator

import numpy as np

from kgd.constants import QUAD_FORM_REL_TOL
from kgd.errors import KgdInputError, KgdNumericError
from kgd.kernels import KernelSpec, as_points, kernel_block, kappa_sq
from kgd.spectral import KernelMatrix

_log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class KgdState:
    """Iterate c_t plus its fitted values K c_t, so each step costs one mat-vec."""

    coeffs: np.ndarray
    t: int
    beta: float
    prev_coeffs: np.ndarray
    fitted: np.ndarray

    @classmethod
    def initial(cls, n: int, beta: float, kappa_sq_value: float) -> KgdState:
        check_step_size(beta, kappa_sq_value)
        zeros = np.zeros(n)
        return cls(coeffs=zeros, t=0, beta=float(beta), prev_coeffs=np.empty(0), fitted=zeros.copy())


@dataclass(frozen=True)
class IncrementNorms:
    d_norm: float
    k_norm: float


@dataclass(frozen=True, eq=False)
class KgdPath:
    """Snapshots c_0..c_T (rows) and the fitted values K c_t at the training inputs."""

    coeffs: np.ndarray
    fitted: np.ndarray
    beta: float

    @property
    def t_last(self) -> int:
        return int(self.coeffs.shape[0] - 1)


def default_step_size(spec: KernelSpec) -> float:
    return 1.0 / kappa_sq(spec)


def check_step_size(beta: float, kappa_sq_value: float) -> None:
    if not (beta > 0 and np.isfinite(beta)):
        raise KgdInputError(f"step size must be positive, got {beta}")
    # small slack so beta = 1/kappa^2 computed in floating point is accepted
    if beta > (1.0 + 1e-12) / kappa_sq_value:
        raise KgdInputError(f"step size {beta} exceeds 1/kappa^2 = {1.0 / kappa_sq_value}")


def _check_targets(matrix: KernelMatrix, y) -> np.ndarray:
    yv = np.asarray(y, dtype=float).reshape(-1)
    if yv.shape[0] != matrix.n:
        raise KgdInputError(f"targets have length {yv.shape[0]}, kernel matrix is {matrix.n}x{matrix.n}")
    return yv


def kgd_step(state: KgdState, matrix: KernelMatrix, y) -> KgdState:
    yv = _check_targets(matrix, y)
    if state.coeffs.shape[0] != matrix.n:
        raise KgdInputError(f"state has {state.coeffs.shape[0]} coefficients, kernel matrix is {matrix.n}x{matrix.n}")
    new_coeffs = state.coeffs - (state.beta / matrix.n) * (state.fitted - yv)
    new_fitted = matrix.entries @ new_coeffs
    if not (np.all(np.isfinite(new_coeffs)) and np.all(np.isfinite(new_fitted))):
        raise KgdNumericError(f"KGD iteration diverged at t={state.t + 1} (beta={state.beta})")
    return replace(state, coeffs=new_coeffs, t=state.t + 1, prev_coeffs=state.coeffs, fitted=new_fitted)


def matrix_kappa_sq(matrix: KernelMatrix) -> float:
    """kappa^2 recorded on the matrix, else the largest diagonal entry (a lower bound for it)."""
    if matrix.kappa_sq is not None:
        return float(matrix.kappa_sq)
    return float(np.max(np.diag(matrix.entries))) if matrix.n else 1.0


def kgd_iterates(matrix: KernelMatrix, y, beta: float) -> Iterator[KgdState]:
    """Yield c_0, c_1, ... lazily; the caller decides when to stop."""
    yv = _check_targets(matrix, y)
    state = KgdState.initial(matrix.n, beta, matrix_kappa_sq(matrix))
    while True:
        yield state
        state = kgd_step(state, matrix, yv)


def run_kgd_path(matrix: KernelMatrix, y, beta: float, t_last: int) -> KgdPath:
    """Advance the recursion from c_0 to c_{t_last}, keeping every snapshot."""
    if t_last < 0:
        raise KgdInputError(f"t_last must be >= 0, got {t_last}")
    coeffs = np.zeros((t_last + 1, matrix.n))
    fitted = np.zeros((t_last + 1, matrix.n))
    for state in kgd_iterates(matrix, y, beta):
        coeffs[state.t] = state.coeffs
        fitted[state.t] = state.fitted
        if state.t == t_last:
            break
    return KgdPath(coeffs=coeffs, fitted=fitted, beta=float(beta))


def kgd_coeffs_at(matrix: KernelMatrix, y, beta: float, t: int) -> np.ndarray:
    """c_t without keeping the intermediate snapshots."""
    if t < 0:
        raise KgdInputError(f"t must be >= 0, got {t}")
    return next(islice(kgd_iterates(matrix, y, beta), t, None)).coeffs


def _filter(u: np.ndarray, t: int, beta: float) -> np.ndarray:
    # g_t(u) = (1 - (1 - beta u)^t) / u, with g_t(0) = beta t
    out = np.full(u.shape, beta * t, dtype=float)
    pos = u > 0
    up = u[pos]
    with np.errstate(divide="ignore"):
        out[pos] = -np.expm1(t * np.log1p(-beta * up)) / up
    return out


def kgd_closed_form(matrix: KernelMatrix, y, t: int, beta: float) -> np.ndarray:
    """c_t = (1/n) V diag(g_t(sigma_i / n)) V^T y."""
    yv = _check_targets(matrix, y)
    if t < 0:
        raise KgdInputError(f"t must be >= 0, got {t}")
    if t == 0:
        return np.zeros(matrix.n)
    g = _filter(matrix.normalized_eigvals, t, beta)
    v = matrix.eigvecs
    return (v @ (g * (v.T @ yv))) / matrix.n


def _clamped_sqrt(q: float, floor: float, what: str) -> float:
    if q >= 0.0:
        return float(np.sqrt(q))
    if q >= -floor:
        return 0.0
    raise KgdNumericError(f"{what} quadratic form is negative ({q:.6g} < -{floor:.3g})")


def increment_norms(prev, cur, matrix: KernelMatrix, n: int) -> IncrementNorms:
    """||f_cur - f_prev||_D and ||f_cur - f_prev||_K from coefficient vectors."""
    delta = np.asarray(cur, dtype=float) - np.asarray(prev, dtype=float)
    if delta.shape != (matrix.n,):
        raise KgdInputError(f"coefficient vectors must have length {matrix.n}")
    k_delta = matrix.entries @ delta
    floor = QUAD_FORM_REL_TOL * float(delta @ delta) * abs(matrix.trace)
    k_sq = float(delta @ k_delta)
    d_sq = float(k_delta @ k_delta) / n
    return IncrementNorms(
        d_norm=_clamped_sqrt(d_sq, floor, "D-norm"),
        k_norm=_clamped_sqrt(k_sq, floor, "K-norm"),
    )


def resolvent_norm_sq(matrix: KernelMatrix, g, lam: float) -> float:
    """||(L_{K,D} + lam I)^{1/2} g||_K^2 = ||g||_D^2 + lam ||g||_K^2 for g with coefficients ``g``."""
    coeffs = np.asarray(g, dtype=float)
    k_g = matrix.entries @ coeffs
    return float(k_g @ k_g) / matrix.n + lam * float(coeffs @ k_g)


def predict(spec: KernelSpec, train_inputs, coeffs, x) -> float:
    return float(predict_many(spec, train_inputs, coeffs, as_points(x, spec.input_dim))[0])


def predict_many(spec: KernelSpec, train_inputs, coeffs, points) -> np.ndarray:
    train = as_points(train_inputs, spec.input_dim)
    c = np.asarray(coeffs, dtype=float).reshape(-1)
    if c.shape[0] != train.shape[0]:
        raise KgdInputError(f"{c.shape[0]} coefficients for {train.shape[0]} training points")
    return kernel_block(spec, points, train) @ c


def training_residual(matrix: KernelMatrix, y, coeffs) -> float:
    return float(np.linalg.norm(matrix.entries @ np.asarray(coeffs, dtype=float) - _check_targets(matrix, y)))


def noise_free_path(matrix: KernelMatrix, f_rho_values, beta: float, t_last: int) -> KgdPath:
    """KGD driven by the noiseless targets f_rho(x_i) instead of the observed outputs."""
    return run_kgd_path(matrix, f_rho_values, beta, t_last)


def bias_variance_profile(matrix: KernelMatrix, y, f_rho_values, beta: float, t_last: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-t empirical bias ||f*_t - f_rho||_D and variance ||f*_t - f_t||_D.

    f*_t is the iterate driven by the noiseless targets f_rho(x_i), f_t the one driven by y.
    """
    f_rho = _check_targets(matrix, f_rho_values)
    noisy = run_kgd_path(matrix, y, beta, t_last)
    clean = noise_free_path(matrix, f_rho, beta, t_last)
    n = matrix.n
    bias = np.sqrt(np.sum((clean.fitted - f_rho[None, :]) ** 2, axis=1) / n)
    variance = np.sqrt(np.sum((clean.fitted - noisy.fitted) ** 2, axis=1) / n)
    return bias, variance
