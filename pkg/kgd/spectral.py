"""Dense symmetric eigendecomposition of Gram matrices and eigenvalue-derived quantities.

The eigenvalues are computed once per kernel matrix and cached on :class:`KernelMatrix`;
the empirical effective dimension and the local empirical Rademacher complexity are then
O(n) evaluations over the cached spectrum.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from kgd.constants import PSD_REL_TOL
from kgd.errors import KgdInputError, KgdNumericError

_log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    """Gram matrix with its eigenvalues (descending, clamped to >= 0) and orthonormal eigenvectors."""

    entries: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray
    # sup_x K(x, x) of the kernel that built the matrix; None for a bare matrix
    kappa_sq: Optional[float] = None

    @property
    def n(self) -> int:
        return int(self.entries.shape[0])

    @property
    def trace(self) -> float:
        return float(np.trace(self.entries))

    @property
    def normalized_eigvals(self) -> np.ndarray:
        """Eigenvalues of K / n, the spectrum of the empirical operator."""
        return self.eigvals / self.n


def _diagnostics(m: np.ndarray) -> str:
    finite = bool(np.all(np.isfinite(m)))
    parts = [f"shape={m.shape}", f"finite={finite}"]
    if finite and m.size:
        parts += [
            f"trace={float(np.trace(m)):.6g}",
            f"fro={float(np.linalg.norm(m)):.6g}",
            f"min={float(m.min()):.6g}",
            f"max={float(m.max()):.6g}",
        ]
    return ", ".join(parts)


def eig_sym(entries: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Full eigendecomposition of a symmetric PSD matrix.

    Returns ``(eigvals, eigvecs)`` with eigenvalues sorted descending and the matching
    eigenvectors as columns. Negative eigenvalues within ``-1e-8 * trace`` are clamped to 0;
    anything more negative means the matrix is not positive semi-definite and is rejected.
    """
    m = np.asarray(entries, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise KgdInputError(f"eig_sym needs a non-empty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise KgdNumericError(f"matrix has non-finite entries ({_diagnostics(m)})")
    try:
        w, v = scipy.linalg.eigh(m, check_finite=False)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, ValueError) as e:
        raise KgdNumericError(f"symmetric eigensolver failed: {e} ({_diagnostics(m)})") from e

    w = w[::-1].copy()
    v = v[:, ::-1].copy()
    scale = abs(float(np.trace(m))) or float(np.linalg.norm(m))
    tol_psd = PSD_REL_TOL * scale
    if w[-1] < -tol_psd:
        raise KgdNumericError(
            f"matrix is not positive semi-definite: smallest eigenvalue {w[-1]:.6g} < -{tol_psd:.3g} ({_diagnostics(m)})"
        )
    clamped = int(np.count_nonzero(w < 0.0))
    if clamped:
        _log.debug("clamped %d slightly negative eigenvalues (min %.3g)", clamped, float(w[-1]))
        w = np.maximum(w, 0.0)
    return w, v


def empirical_effective_dim(eigvals: np.ndarray, lam, n: int):
    """N_D(lambda) = sum_i sigma_i / (sigma_i + lambda * n) over eigenvalues of K.

    ``lam`` may be a scalar or an array of regularisation values; the result has the same shape.
    """
    sig = np.asarray(eigvals, dtype=float)
    lam_arr = np.asarray(lam, dtype=float)
    if np.any(lam_arr <= 0):
        raise KgdInputError("lambda must be positive")
    if lam_arr.ndim == 0:
        return float(np.sum(sig / (sig + float(lam_arr) * n)))
    return np.sum(sig[None, :] / (sig[None, :] + lam_arr.reshape(-1, 1) * n), axis=1).reshape(lam_arr.shape)


def effective_dim_at(eigvals: np.ndarray, t, n: int):
    """N_D(1/t), the effective dimension at iteration count t (scalar or array, t > 0)."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0):
        raise KgdInputError("iteration count must be positive")
    return empirical_effective_dim(eigvals, 1.0 / t_arr, n)


def local_rademacher(normalized_eigvals: np.ndarray, epsilon, n: int):
    """sqrt((1/n) * sum_i min(mu_i, epsilon^2)) over eigenvalues mu_i of K / n.

    ``epsilon`` may be a scalar or an array.
    """
    mu = np.asarray(normalized_eigvals, dtype=float)
    eps = np.asarray(epsilon, dtype=float)
    if np.any(eps <= 0):
        raise KgdInputError("epsilon must be positive")
    if eps.ndim == 0:
        return float(np.sqrt(np.sum(np.minimum(mu, float(eps) ** 2)) / n))
    eps_sq = (eps.reshape(-1, 1)) ** 2
    return np.sqrt(np.sum(np.minimum(mu[None, :], eps_sq), axis=1) / n).reshape(eps.shape)
