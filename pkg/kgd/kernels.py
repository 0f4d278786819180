"""Mercer kernels on the unit cube and Gram-matrix assembly.

Three kernel kinds are supported:

- ``MIN_PLUS_ONE``: K(x, x') = 1 + min(x, x') on [0, 1] (reproducing kernel of W^1_1).
- ``WENDLAND_G3``: K(x, x') = g3(||x - x'||_2) with g3(r) = (1 - r)^4 (4r + 1) on [0, 1]
  and 0 beyond; compactly supported, any input dimension.
- ``GAUSSIAN``: exp(-||x - x'||^2 / (2 h^2)); an extra kind for harness flexibility.

All evaluation goes through :func:`kernel_block` so that single evaluations and matrix
entries share the same floating-point arithmetic.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from kgd.constants import DEFAULT_GAUSSIAN_BANDWIDTH
from kgd.errors import KgdDimensionError, KgdInputError, KgdNumericError
from kgd.spectral import KernelMatrix, eig_sym

_log = logging.getLogger(__name__)


class KernelKind(str, Enum):
    MIN_PLUS_ONE = "min_plus_one"
    WENDLAND_G3 = "wendland_g3"
    GAUSSIAN = "gaussian"


# CLI / config aliases
KERNEL_ALIASES = {
    "k1": KernelKind.MIN_PLUS_ONE,
    "min": KernelKind.MIN_PLUS_ONE,
    "min_plus_one": KernelKind.MIN_PLUS_ONE,
    "k2": KernelKind.WENDLAND_G3,
    "wendland": KernelKind.WENDLAND_G3,
    "wendland_g3": KernelKind.WENDLAND_G3,
    "gaussian": KernelKind.GAUSSIAN,
    "rbf": KernelKind.GAUSSIAN,
}


@dataclass(frozen=True)
class KernelSpec:
    kind: KernelKind
    input_dim: int
    bandwidth: float = DEFAULT_GAUSSIAN_BANDWIDTH

    def __post_init__(self) -> None:
        if self.input_dim < 1:
            raise KgdInputError(f"input_dim must be >= 1, got {self.input_dim}")
        if self.kind is KernelKind.MIN_PLUS_ONE and self.input_dim != 1:
            raise KgdInputError(f"min_plus_one kernel is one-dimensional, got input_dim={self.input_dim}")
        if self.kind is KernelKind.GAUSSIAN and not (self.bandwidth > 0 and np.isfinite(self.bandwidth)):
            raise KgdInputError(f"gaussian bandwidth must be positive, got {self.bandwidth}")

    @classmethod
    def from_name(cls, name: str, input_dim: int, bandwidth: float = DEFAULT_GAUSSIAN_BANDWIDTH) -> KernelSpec:
        kind = KERNEL_ALIASES.get((name or "").strip().lower())
        if kind is None:
            raise KgdInputError(f"unknown kernel '{name}' (expected one of {sorted(KERNEL_ALIASES)})")
        return cls(kind=kind, input_dim=input_dim, bandwidth=bandwidth)


@dataclass(frozen=True)
class Dataset:
    """Sample set D: n points of the unit cube [0, 1]^d and their real outputs."""

    inputs: np.ndarray
    outputs: np.ndarray

    def __post_init__(self) -> None:
        x = np.asarray(self.inputs, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        y = np.asarray(self.outputs, dtype=float).reshape(-1)
        if x.ndim != 2:
            raise KgdInputError(f"inputs must be a list of points, got array of shape {x.shape}")
        if x.shape[0] != y.shape[0]:
            raise KgdInputError(f"inputs and outputs differ in length: {x.shape[0]} vs {y.shape[0]}")
        if x.shape[0] < 1:
            raise KgdInputError("dataset must contain at least one sample")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise KgdInputError("dataset contains non-finite values")
        if np.any(x < 0.0) or np.any(x > 1.0):
            raise KgdInputError("inputs must lie in the unit cube [0, 1]^d; rescale the data first")
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "outputs", y)

    @property
    def n(self) -> int:
        return int(self.outputs.shape[0])

    @property
    def dim(self) -> int:
        return int(self.inputs.shape[1])

    def subset(self, index: Sequence[int] | np.ndarray) -> Dataset:
        idx = np.asarray(index, dtype=int)
        return Dataset(inputs=self.inputs[idx], outputs=self.outputs[idx])


def as_points(points, input_dim: int) -> np.ndarray:
    """Coerce ``points`` to an (m, input_dim) float array, checking the dimension."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1) if input_dim == 1 else arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] != input_dim:
        raise KgdDimensionError(f"expected points of dimension {input_dim}, got array of shape {arr.shape}")
    return arr


def _g3(r: np.ndarray) -> np.ndarray:
    # exact zero outside the support
    return np.where(r < 1.0, (1.0 - r) ** 4 * (4.0 * r + 1.0), 0.0)


def kernel_block(spec: KernelSpec, left, right) -> np.ndarray:
    """Return the (m, p) matrix of K(left_i, right_j)."""
    a = as_points(left, spec.input_dim)
    b = as_points(right, spec.input_dim)
    if spec.kind is KernelKind.MIN_PLUS_ONE:
        block = 1.0 + np.minimum(a[:, None, 0], b[None, :, 0])
    else:
        diff = a[:, None, :] - b[None, :, :]
        sq = np.sum(diff * diff, axis=-1)
        if spec.kind is KernelKind.WENDLAND_G3:
            block = _g3(np.sqrt(sq))
        else:
            block = np.exp(-sq / (2.0 * spec.bandwidth ** 2))
    if not np.all(np.isfinite(block)):
        raise KgdNumericError(f"non-finite kernel value for {spec.kind.value}")
    return block


def eval_kernel(spec: KernelSpec, x, x_prime) -> float:
    return float(kernel_block(spec, as_points(x, spec.input_dim), as_points(x_prime, spec.input_dim))[0, 0])


def kappa_sq(spec: KernelSpec) -> float:
    """sup_x K(x, x) over the unit cube, in closed form per kernel kind."""
    if spec.kind is KernelKind.MIN_PLUS_ONE:
        return 2.0
    return 1.0


def build_kernel_matrix(spec: KernelSpec, points) -> KernelMatrix:
    pts = as_points(points, spec.input_dim)
    if pts.shape[0] < 1:
        raise KgdInputError("kernel matrix needs at least one point")
    block = kernel_block(spec, pts, pts)
    # mirror the upper triangle so the matrix is symmetric bit for bit
    upper = np.triu(block)
    entries = upper + np.triu(block, 1).T
    eigvals, eigvecs = eig_sym(entries)
    _log.debug("kernel matrix %s n=%d trace=%.6g top eigenvalue=%.6g",
               spec.kind.value, pts.shape[0], float(np.trace(entries)), float(eigvals[0]))
    return KernelMatrix(entries=entries, eigvals=eigvals, eigvecs=eigvecs, kappa_sq=kappa_sq(spec))
