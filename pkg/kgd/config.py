"""Typed configuration for the stopping rules and the simulation study.

Config files are flat YAML mappings; keys are the field names of :class:`ExperimentConfig`
and :class:`RuleConfig` side by side. Unknown keys are rejected with the key named.
"""
from __future__ import annotations

import math
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from ruamel.yaml import YAML
from ruamel.yaml.error import YAMLError

from kgd.constants import (
    DEFAULT_BENCH_RULES,
    DEFAULT_C_DSR,
    DEFAULT_CV_FRACTION,
    DEFAULT_CV_GRID,
    DEFAULT_DELTA,
    DEFAULT_LEPSKII_Q,
    DEFAULT_N_GRID,
    DEFAULT_NOISE_VARIANCE,
    DEFAULT_REPS,
    DEFAULT_TEST_FRACTION,
    RULE_IDS,
    SCENARIO_DIMS,
)
from kgd.errors import KgdConfigError


class RuleConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    delta: float = Field(DEFAULT_DELTA, gt=0.0, lt=1.0)
    c_cv: float = Field(1.0, gt=0.0)
    c_bp: float = Field(1.0, gt=0.0)
    c_lp: float = Field(1.0, gt=0.0)
    c_dsr: float = Field(DEFAULT_C_DSR, gt=0.0)
    q: float = Field(DEFAULT_LEPSKII_Q, gt=1.0)
    t_max: Optional[int] = Field(None, ge=1)
    m_noise: Optional[float] = Field(None, gt=0.0)
    gamma_noise: Optional[float] = Field(None, gt=0.0)
    beta: Optional[float] = Field(None, gt=0.0)
    asr_variant: Literal["practical", "theory"] = "practical"
    cv_fraction: float = Field(DEFAULT_CV_FRACTION, gt=0.0, lt=1.0)
    cv_grid: List[float] = Field(default_factory=lambda: list(DEFAULT_CV_GRID))

    @field_validator("c_cv", "c_bp", "c_lp", "c_dsr")
    @classmethod
    def _finite_or_inf(cls, v: float) -> float:
        if math.isnan(v):
            raise ValueError("constant must not be NaN")
        return v

    @field_validator("cv_grid")
    @classmethod
    def _positive_grid(cls, v: List[float]) -> List[float]:
        if any(not (c > 0 and math.isfinite(c)) for c in v):
            raise ValueError("cv_grid entries must be positive and finite")
        return v

    def resolved_t_max(self, n: int) -> int:
        return int(self.t_max) if self.t_max is not None else int(n)

    def with_constant(self, field: str, value: float) -> RuleConfig:
        return self.model_copy(update={field: float(value)})


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    scenario: Literal["G1K1", "G2K2"] = "G1K1"
    n_grid: List[int] = Field(default_factory=lambda: list(DEFAULT_N_GRID))
    reps: int = Field(DEFAULT_REPS, ge=1)
    noise_variance: float = Field(DEFAULT_NOISE_VARIANCE, ge=0.0)
    noise_parametrization: Literal["variance", "std"] = "variance"
    rules: List[str] = Field(default_factory=lambda: list(DEFAULT_BENCH_RULES))
    master_seed: int = Field(0, ge=0)
    test_fraction: float = Field(DEFAULT_TEST_FRACTION, gt=0.0, le=1.0)
    rule_config: RuleConfig = Field(default_factory=RuleConfig)

    @field_validator("scenario", mode="before")
    @classmethod
    def _upper_scenario(cls, v: Any) -> Any:
        return v.upper() if isinstance(v, str) else v

    @field_validator("n_grid")
    @classmethod
    def _increasing(cls, v: List[int]) -> List[int]:
        if not v:
            raise ValueError("n_grid must not be empty")
        if any(n < 10 for n in v):
            raise ValueError("every n in n_grid must be >= 10")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("n_grid must be strictly increasing")
        return v

    @field_validator("rules")
    @classmethod
    def _known_rules(cls, v: List[str]) -> List[str]:
        out: List[str] = []
        for r in v:
            key = str(r).strip().lower()
            if key not in RULE_IDS:
                raise ValueError(f"unknown rule '{r}' (expected one of {', '.join(RULE_IDS)})")
            if key not in out:
                out.append(key)
        if not out:
            raise ValueError("at least one rule is required")
        return out

    @model_validator(mode="after")
    def _noise_positive_for_bench(self) -> ExperimentConfig:
        if self.noise_variance == 0.0 and any(r.startswith("dsr") for r in self.rules):
            raise ValueError("noise_variance must be > 0 when DSR rules are enabled")
        return self

    @property
    def input_dim(self) -> int:
        return SCENARIO_DIMS[self.scenario]

    @property
    def noise_std(self) -> float:
        if self.noise_parametrization == "std":
            return float(self.noise_variance)
        return math.sqrt(self.noise_variance)


RULE_KEYS = frozenset(RuleConfig.model_fields)
EXPERIMENT_KEYS = frozenset(ExperimentConfig.model_fields) - {"rule_config"}


def _format_validation_error(err: ValidationError) -> str:
    parts = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e.get("loc", ())) or "<root>"
        parts.append(f"{loc}: {e.get('msg')}")
    return "; ".join(parts)


def load_config_file(path: Path) -> Dict[str, Any]:
    """Read a flat YAML mapping; an empty file yields an empty dict."""
    yaml = YAML(typ="safe")
    try:
        with Path(path).open("r", encoding="utf-8") as fh:
            data = yaml.load(fh)
    except FileNotFoundError as e:
        raise KgdConfigError(f"config file not found: {path}") from e
    except (OSError, YAMLError) as e:
        raise KgdConfigError(f"cannot read config file {path}: {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise KgdConfigError(f"config root must be a mapping: {path}")
    return dict(data)


def parse_override(text: str) -> tuple[str, Any]:
    """Parse a ``key=value`` override; the value is read as a YAML scalar or flow list."""
    if "=" not in text:
        raise KgdConfigError(f"override must look like key=value, got '{text}'")
    key, raw = text.split("=", 1)
    key = key.strip().replace("-", "_")
    if not key:
        raise KgdConfigError(f"override has an empty key: '{text}'")
    try:
        value = YAML(typ="safe").load(raw) if raw.strip() else None
    except YAMLError as e:
        raise KgdConfigError(f"cannot parse value for '{key}': {e}") from e
    return key, value


def split_flat(flat: Mapping[str, Any]) -> tuple[Dict[str, Any], Dict[str, Any]]:
    """Split a flat key/value mapping into (experiment fields, rule fields)."""
    exp: Dict[str, Any] = {}
    rule: Dict[str, Any] = {}
    for raw_key, value in flat.items():
        key = str(raw_key).strip().replace("-", "_")
        if key in RULE_KEYS:
            rule[key] = value
        elif key in EXPERIMENT_KEYS:
            exp[key] = value
        else:
            raise KgdConfigError(f"unknown config key '{raw_key}'")
    return exp, rule


def build_rule_config(flat: Mapping[str, Any]) -> RuleConfig:
    exp, rule = split_flat(flat)
    if exp:
        raise KgdConfigError(f"unknown rule config key '{sorted(exp)[0]}'")
    try:
        return RuleConfig(**rule)
    except ValidationError as e:
        raise KgdConfigError(_format_validation_error(e)) from e


def build_experiment_config(flat: Mapping[str, Any]) -> ExperimentConfig:
    exp, rule = split_flat(flat)
    try:
        return ExperimentConfig(**exp, rule_config=RuleConfig(**rule))
    except ValidationError as e:
        raise KgdConfigError(_format_validation_error(e)) from e


def flatten_experiment_config(config: ExperimentConfig) -> Dict[str, Any]:
    """Inverse of :func:`build_experiment_config`, used for the run manifest."""
    flat = config.model_dump(exclude={"rule_config"})
    flat.update(config.rule_config.model_dump())
    return flat
