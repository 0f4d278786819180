"""Small shared helpers for the kgd unit tests (importable because tests/ is on pythonpath)."""
from __future__ import annotations

import numpy as np

from kgd.kernels import Dataset, KernelKind, KernelSpec, build_kernel_matrix

K1 = KernelSpec(KernelKind.MIN_PLUS_ONE, 1)
K2_1D = KernelSpec(KernelKind.WENDLAND_G3, 1)
K2_3D = KernelSpec(KernelKind.WENDLAND_G3, 3)


def tent(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    return np.where(x <= 0.5, x, 1.0 - x)


def noisy_tent(n: int, seed: int, noise_std: float = 0.2 ** 0.5) -> Dataset:
    rng = np.random.default_rng(seed)
    x = rng.random(n)
    return Dataset(inputs=x, outputs=tent(x) + rng.normal(0.0, noise_std, n))


def random_instance(spec: KernelSpec, n: int, seed: int):
    """(dataset, kernel matrix) with uniform inputs and standard normal outputs."""
    rng = np.random.default_rng(seed)
    x = rng.random((n, spec.input_dim))
    data = Dataset(inputs=x, outputs=rng.normal(size=n))
    return data, build_kernel_matrix(spec, data.inputs)


def dense_effective_dim(entries: np.ndarray, lam: float) -> float:
    """Tr[(lam n I + K)^{-1} K] by a dense solve."""
    n = entries.shape[0]
    return float(np.trace(np.linalg.solve(lam * n * np.eye(n) + entries, entries)))
