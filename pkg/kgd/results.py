"""CSV output of MSE curves and rule traces, plus the JSON run manifest.

The curve CSV has a fixed column order (``CSV_COLUMNS``), 12 significant digits and
``\\n`` line endings so identical runs produce identical bytes.
"""
from __future__ import annotations

import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from kgd.benchmark import MseCurve, MseCurvePoint, RepOutcome, failures
from kgd.config import ExperimentConfig, flatten_experiment_config
from kgd.constants import CSV_COLUMNS, CSV_FLOAT_FORMAT
from kgd.errors import KgdDataFileError, KgdResultsIOError
from kgd.kernels import Dataset
from kgd.stopping_rules import StoppingDecision

_log = logging.getLogger(__name__)

MANIFEST_SUFFIX = ".manifest.json"


def manifest_path(csv_path: Path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.stem + MANIFEST_SUFFIX)


def _write_frame(df: pd.DataFrame, path: Path) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        df.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n", na_rep="nan")
    except OSError as e:
        raise KgdResultsIOError(f"cannot write {path}: {e}") from e


def curves_frame(curves: Sequence[MseCurve]) -> pd.DataFrame:
    rows = [
        {
            "scenario": c.scenario,
            "rule": c.rule_name,
            "n": int(p.n),
            "rep_count": int(p.rep_count),
            "mean_mse": float(p.mean_mse),
            "std_mse": float(p.std_mse),
            "mean_t_hat": float(p.mean_t_hat),
            "truncated_count": int(p.truncated_count),
        }
        for c in curves
        for p in c.points
    ]
    return pd.DataFrame(rows, columns=list(CSV_COLUMNS))


def build_manifest(config: ExperimentConfig, outcomes: Sequence[RepOutcome] = ()) -> Dict[str, Any]:
    return {
        "config": flatten_experiment_config(config),
        "seeding": {"master_seed": config.master_seed, "cell_entropy": ["master_seed", "n", "rep"]},
        "failures": [
            {"rule": o.rule, "n": o.n, "rep": o.rep, "error": o.error} for o in failures(outcomes)
        ],
    }


def emit_results(
    curves: Sequence[MseCurve],
    path: Path,
    config: Optional[ExperimentConfig] = None,
    outcomes: Sequence[RepOutcome] = (),
) -> Path:
    """Write the curve CSV; with ``config`` also write the manifest next to it."""
    path = Path(path)
    _write_frame(curves_frame(curves), path)
    _log.info("wrote %s", path)
    if config is not None:
        mpath = manifest_path(path)
        try:
            mpath.write_text(json.dumps(build_manifest(config, outcomes), indent=2, sort_keys=True) + "\n",
                             encoding="utf-8")
        except OSError as e:
            raise KgdResultsIOError(f"cannot write {mpath}: {e}") from e
        _log.info("wrote %s", mpath)
    return path


def parse_results(path: Path) -> List[MseCurve]:
    """Read a curve CSV back; curves keep the order in which their rows first appear."""
    path = Path(path)
    try:
        df = pd.read_csv(path, dtype={"scenario": str, "rule": str})
    except FileNotFoundError as e:
        raise KgdResultsIOError(f"results file not found: {path}") from e
    except (OSError, pd.errors.ParserError) as e:
        raise KgdResultsIOError(f"cannot read {path}: {e}") from e
    if tuple(df.columns) != CSV_COLUMNS:
        raise KgdResultsIOError(f"{path}: unexpected columns {list(df.columns)}")

    grouped: Dict[tuple[str, str], List[MseCurvePoint]] = {}
    for row in df.itertuples(index=False):
        grouped.setdefault((row.scenario, row.rule), []).append(
            MseCurvePoint(
                n=int(row.n),
                rep_count=int(row.rep_count),
                mean_mse=float(row.mean_mse),
                std_mse=float(row.std_mse),
                mean_t_hat=float(row.mean_t_hat),
                truncated_count=int(row.truncated_count),
            )
        )
    return [MseCurve(scenario=s, rule_name=r, points=tuple(pts)) for (s, r), pts in grouped.items()]


def load_manifest(csv_path: Path) -> Dict[str, Any]:
    mpath = manifest_path(csv_path)
    try:
        return json.loads(mpath.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise KgdResultsIOError(f"cannot read manifest {mpath}: {e}") from e


def read_dataset(path: Path) -> Dataset:
    """Read a comma- or whitespace-delimited file with columns x_1..x_d, y ('#' starts a comment)."""
    path = Path(path)
    try:
        df = pd.read_csv(path, sep=r"[,\s]+", header=None, comment="#", engine="python")
    except FileNotFoundError as e:
        raise KgdDataFileError(f"dataset file not found: {path}") from e
    except pd.errors.EmptyDataError as e:
        raise KgdDataFileError(f"dataset file is empty: {path}") from e
    except (OSError, pd.errors.ParserError) as e:
        raise KgdDataFileError(f"cannot read dataset file {path}: {e}") from e
    # leading whitespace produces an all-empty first column
    df = df.dropna(axis=1, how="all")
    if df.shape[1] < 2:
        raise KgdDataFileError(f"{path}: need at least one input column and one output column")
    try:
        values = df.apply(pd.to_numeric, errors="raise").to_numpy(dtype=float)
    except (ValueError, TypeError) as e:
        raise KgdDataFileError(f"{path}: non-numeric value ({e})") from e
    if np.isnan(values).any():
        raise KgdDataFileError(f"{path}: rows have differing numbers of columns")
    return Dataset(inputs=values[:, :-1], outputs=values[:, -1])


def trace_frame(decision: StoppingDecision, profile: Optional[tuple[np.ndarray, np.ndarray]] = None) -> pd.DataFrame:
    """Per-iteration (t, lhs, rhs) table; u_statistic and bias/variance columns when available."""
    df = pd.DataFrame(
        {
            "t": [p.t for p in decision.trace],
            "lhs": [p.lhs for p in decision.trace],
            "rhs": [p.rhs for p in decision.trace],
        }
    )
    if any(p.u_stat is not None for p in decision.trace):
        df["u_statistic"] = [math.nan if p.u_stat is None else p.u_stat for p in decision.trace]
    if profile is not None:
        bias, variance = profile
        idx = df["t"].to_numpy()
        in_range = idx < len(bias)
        df["bias_d"] = np.where(in_range, bias[np.minimum(idx, len(bias) - 1)], math.nan)
        df["variance_d"] = np.where(in_range, variance[np.minimum(idx, len(variance) - 1)], math.nan)
    return df


def emit_trace(decision: StoppingDecision, path: Path,
               profile: Optional[tuple[np.ndarray, np.ndarray]] = None) -> Path:
    path = Path(path)
    _write_frame(trace_frame(decision, profile), path)
    _log.info("wrote trace %s (%d rows)", path, len(decision.trace))
    return path
