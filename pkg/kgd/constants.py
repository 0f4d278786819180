"""Shared constants used across the kgd modules and the CLI.

Centralised here so defaults shown by ``--help``, the config models and the
benchmark stay in sync.
"""
from __future__ import annotations

import math
from typing import Dict, List, Tuple

# ---------------------------------------------------------------------------
# Rule identifiers (CLI spelling)
# ---------------------------------------------------------------------------
RULE_ASR = "asr"
RULE_ASR_THEORY = "asr-theory"
RULE_ORACLE = "or"
RULE_HOLDOUT = "ho"
RULE_BALANCING = "bp"
RULE_LEPSKII = "lp"
RULE_DSR_CV = "dsr1"
RULE_DSR_FIXED = "dsr2"

RULE_IDS: Tuple[str, ...] = (
    RULE_ASR, RULE_ASR_THEORY, RULE_ORACLE, RULE_HOLDOUT,
    RULE_BALANCING, RULE_LEPSKII, RULE_DSR_CV, RULE_DSR_FIXED,
)

# Rules whose constant is selected by cross-validation, and the RuleConfig field it lands in
CV_CONSTANT_FIELD: Dict[str, str] = {
    RULE_ASR: "c_cv",
    RULE_BALANCING: "c_bp",
    RULE_LEPSKII: "c_lp",
    RULE_DSR_CV: "c_dsr",
}

# Rules reported in the simulation figure
DEFAULT_BENCH_RULES: List[str] = [
    RULE_ASR, RULE_ORACLE, RULE_HOLDOUT, RULE_BALANCING,
    RULE_LEPSKII, RULE_DSR_CV, RULE_DSR_FIXED,
]

# ---------------------------------------------------------------------------
# Rule defaults
# ---------------------------------------------------------------------------
DEFAULT_DELTA = 0.05
DEFAULT_C_DSR = 2.0 * math.e
DEFAULT_LEPSKII_Q = 2.0
DEFAULT_CV_FRACTION = 0.5
DEFAULT_CV_GRID: List[float] = [2.0 ** k for k in range(-14, 7)]
T_MAX_UNBOUNDED = 10 ** 6

# ---------------------------------------------------------------------------
# Simulation protocol defaults
# ---------------------------------------------------------------------------
SCENARIO_G1K1 = "G1K1"
SCENARIO_G2K2 = "G2K2"
SCENARIO_DIMS: Dict[str, int] = {SCENARIO_G1K1: 1, SCENARIO_G2K2: 3}
DEFAULT_N_GRID: List[int] = list(range(100, 1501, 100))
DEFAULT_REPS = 100
DEFAULT_NOISE_VARIANCE = 0.2
DEFAULT_TEST_FRACTION = 0.1
DEFAULT_GAUSSIAN_BANDWIDTH = 0.2

# ---------------------------------------------------------------------------
# Numerical tolerances
# ---------------------------------------------------------------------------
PSD_REL_TOL = 1e-8          # eigenvalues above -PSD_REL_TOL * trace are clamped to zero
QUAD_FORM_REL_TOL = 1e-12   # quadratic forms above -tol * |delta|^2 * trace are clamped

# ---------------------------------------------------------------------------
# Output format
# ---------------------------------------------------------------------------
CSV_COLUMNS: Tuple[str, ...] = (
    "scenario", "rule", "n", "rep_count", "mean_mse", "std_mse", "mean_t_hat", "truncated_count",
)
CSV_FLOAT_FORMAT = "%.12g"
