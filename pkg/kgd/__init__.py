"""Kernel gradient descent with adaptive and baseline early-stopping rules.

Commonly used entry points are re-exported here (e.g. `from kgd import asr_stop`).
"""
from .benchmark import generate_data, run_experiment, target_value  # noqa: F401
from .config import ExperimentConfig, RuleConfig  # noqa: F401
from .core import kgd_closed_form, kgd_step, predict, run_kgd_path  # noqa: F401
from .kernels import Dataset, KernelKind, KernelSpec, build_kernel_matrix, eval_kernel  # noqa: F401
from .stopping_rules import (  # noqa: F401
    StoppingDecision,
    asr_stop,
    bp_stop,
    cross_validate_constant,
    dsr_stop,
    estimate_noise_std,
    holdout_stop,
    lp_stop,
    oracle_stop,
)

__all__ = [
    "Dataset",
    "ExperimentConfig",
    "KernelKind",
    "KernelSpec",
    "RuleConfig",
    "StoppingDecision",
    "asr_stop",
    "bp_stop",
    "build_kernel_matrix",
    "cross_validate_constant",
    "dsr_stop",
    "estimate_noise_std",
    "eval_kernel",
    "generate_data",
    "holdout_stop",
    "kgd_closed_form",
    "kgd_step",
    "lp_stop",
    "oracle_stop",
    "predict",
    "run_experiment",
    "run_kgd_path",
    "target_value",
]
