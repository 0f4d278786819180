from __future__ import annotations

import json
import re
from pathlib import Path

import pandas as pd
import pytest
from sqlalchemy import create_engine, func, inspect, select

from db.models import BenchmarkRun, RepOutcomeRow

pytestmark = pytest.mark.workflow

CLI = "scripts/kgd_cli.py"


def _assert_ok(rc, cp, context: str = ""):
    if rc != 0:
        msg = [
            f"Command failed{': ' + context if context else ''}",
            f"RC={rc}",
            "STDOUT:",
            cp.stdout,
            "STDERR:",
            cp.stderr,
        ]
        raise AssertionError("\n".join(msg))


def _field(stdout: str, name: str) -> str:
    m = re.search(rf"^{re.escape(name)}: (.+)$", stdout, re.MULTILINE)
    assert m, f"'{name}' missing from output:\n{stdout}"
    return m.group(1).strip()


def test_bench_single_cell(cli, venv_python: str, tmp_path: Path):
    out = tmp_path / "bench.csv"
    cp = cli([venv_python, CLI, "bench", "--scenario", "g1k1", "--n-grid", "100", "--reps", "1",
              "--rules", "or", "--seed", "7", "--out", str(out)])
    _assert_ok(cp.returncode, cp, "bench")
    assert "Wrote 1 rows" in cp.stdout
    df = pd.read_csv(out)
    assert list(df.columns) == ["scenario", "rule", "n", "rep_count", "mean_mse", "std_mse", "mean_t_hat",
                                "truncated_count"]
    assert df.shape[0] == 1
    assert df.loc[0, "rule"] == "or" and df.loc[0, "n"] == 100 and df.loc[0, "rep_count"] == 1
    manifest = json.loads((tmp_path / "bench.manifest.json").read_text("utf-8"))
    assert manifest["config"]["master_seed"] == 7
    assert manifest["failures"] == []


def test_bench_is_deterministic(cli, venv_python: str, tmp_path: Path):
    args = ["bench", "--n-grid", "20,30", "--reps", "2", "--rules", "asr,bp,ho", "--seed", "3"]
    for name in ("a.csv", "b.csv"):
        cp = cli([venv_python, CLI, *args, "--out", str(tmp_path / name)])
        _assert_ok(cp.returncode, cp, f"bench {name}")
    cp = cli([venv_python, CLI, *args, "--jobs", "2", "--out", str(tmp_path / "c.csv")])
    _assert_ok(cp.returncode, cp, "bench --jobs 2")
    a = (tmp_path / "a.csv").read_bytes()
    assert a == (tmp_path / "b.csv").read_bytes()
    assert a == (tmp_path / "c.csv").read_bytes()


def test_bench_config_file_and_overrides(cli, venv_python: str, tmp_path: Path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("scenario: G2K2\nn_grid: [20]\nreps: 3\nrules: [or]\n", encoding="utf-8")
    out = tmp_path / "bench.csv"
    cp = cli([venv_python, CLI, "bench", "--config", str(cfg), "--set", "reps=2", "--out", str(out)])
    _assert_ok(cp.returncode, cp, "bench --config")
    df = pd.read_csv(out)
    assert df.loc[0, "scenario"] == "G2K2"
    assert df.loc[0, "rep_count"] == 2


def test_bench_stores_outcomes(cli, venv_python: str, tmp_path: Path, tmp_db_url: str):
    cp = cli([venv_python, CLI, "bench", "--n-grid", "20,30", "--reps", "2", "--rules", "or,ho",
              "--out", str(tmp_path / "bench.csv"), "--db-url", tmp_db_url])
    _assert_ok(cp.returncode, cp, "bench --db-url")
    assert re.search(r"Stored run \d+ \(8 outcomes\)", cp.stdout), cp.stdout
    engine = create_engine(tmp_db_url)
    try:
        with engine.connect() as conn:
            assert conn.scalar(select(func.count()).select_from(BenchmarkRun.__table__)) == 1
            assert conn.scalar(select(func.count()).select_from(RepOutcomeRow.__table__)) == 8
    finally:
        engine.dispose()


def test_fit_reports_stopping_time(cli, venv_python: str, data_file):
    data = data_file("train.csv", 80, seed=1)
    test = data_file("test.csv", 40, seed=2)
    cp = cli([venv_python, CLI, "fit", "--data", str(data), "--test-data", str(test), "--rule", "asr"])
    _assert_ok(cp.returncode, cp, "fit")
    assert _field(cp.stdout, "rule") == "asr"
    assert int(_field(cp.stdout, "t_hat")) >= 1
    assert float(_field(cp.stdout, "test_mse")) >= 0.0
    assert float(_field(cp.stdout, "noise_std_estimate")) > 0.0

    again = cli([venv_python, CLI, "fit", "--data", str(data), "--test-data", str(test), "--rule", "asr"])
    assert again.stdout == cp.stdout


def test_fit_with_cross_validated_constant(cli, venv_python: str, data_file):
    data = data_file("train.csv", 80, seed=4)
    cp = cli([venv_python, CLI, "fit", "--data", str(data), "--rule", "bp", "--cv"])
    _assert_ok(cp.returncode, cp, "fit --cv")
    assert float(_field(cp.stdout, "cv_c_bp")) > 0.0


def test_fit_multivariate_defaults_to_wendland(cli, venv_python: str, data_file):
    data = data_file("train3.csv", 60, seed=5, dim=3)
    cp = cli([venv_python, CLI, "fit", "--data", str(data), "--rule", "dsr2"])
    _assert_ok(cp.returncode, cp, "fit 3-d")
    assert _field(cp.stdout, "rule") == "dsr2"


def test_rules_trace_with_profile(cli, venv_python: str, data_file, tmp_path: Path):
    data = data_file("train.csv", 60, seed=3)
    trace = tmp_path / "trace.csv"
    cp = cli([venv_python, CLI, "rules-trace", "--data", str(data), "--rule", "asr", "--target", "g1",
              "--profile", "--trace-out", str(trace)])
    _assert_ok(cp.returncode, cp, "rules-trace")
    df = pd.read_csv(trace)
    assert list(df.columns) == ["t", "lhs", "rhs", "bias_d", "variance_d"]
    assert df["t"].iloc[0] == 1
    assert df["t"].iloc[-1] == int(_field(cp.stdout, "t_hat"))


def test_unknown_override_is_config_error(cli, venv_python: str, data_file):
    data = data_file("train.csv", 30, seed=0)
    cp = cli([venv_python, CLI, "fit", "--data", str(data), "--set", "bogus=1"])
    assert cp.returncode == 2
    assert "config error" in cp.stderr and "bogus" in cp.stderr


def test_bench_rejects_zero_jobs(cli, venv_python: str, tmp_path: Path):
    out = tmp_path / "bench.csv"
    cp = cli([venv_python, CLI, "bench", "--n-grid", "20", "--reps", "1", "--rules", "or", "--jobs", "0",
              "--out", str(out)])
    assert cp.returncode == 2
    assert "--jobs" in cp.stderr
    assert not out.exists()


def test_oracle_needs_target(cli, venv_python: str, data_file):
    data = data_file("train.csv", 30, seed=0)
    cp = cli([venv_python, CLI, "fit", "--data", str(data), "--rule", "or"])
    assert cp.returncode == 2
    assert "--target" in cp.stderr


def test_missing_data_file(cli, venv_python: str, tmp_path: Path):
    cp = cli([venv_python, CLI, "fit", "--data", str(tmp_path / "nope.csv")])
    assert cp.returncode == 1
    assert cp.stderr.strip().startswith("data file error:")


def test_dimension_mismatch(cli, venv_python: str, data_file):
    data = data_file("train3.csv", 30, seed=0, dim=3)
    cp = cli([venv_python, CLI, "fit", "--data", str(data), "--kernel", "k1"])
    assert cp.returncode == 1
    assert cp.stderr.strip().startswith("dimension mismatch:")

    train = data_file("train.csv", 30, seed=1)
    cp = cli([venv_python, CLI, "fit", "--data", str(train), "--test-data", str(data)])
    assert cp.returncode == 1
    assert "dimension mismatch" in cp.stderr


@pytest.mark.parametrize("mode", [[], ["--use-metadata"]])
def test_bootstrap_creates_schema(cli, venv_python: str, tmp_db_url: str, mode):
    cp = cli([venv_python, "scripts/00_bootstrap/bootstrap_db.py", "--db-url", tmp_db_url, *mode])
    _assert_ok(cp.returncode, cp, "bootstrap_db")
    assert "Target DB URL:" in cp.stdout
    engine = create_engine(tmp_db_url)
    try:
        tables = set(inspect(engine).get_table_names())
    finally:
        engine.dispose()
    assert {"benchmark_run", "rep_outcome"} <= tables
