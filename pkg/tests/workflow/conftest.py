from __future__ import annotations

import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest


@pytest.fixture(scope="session")
def repo_root() -> Path:
    # tests/workflow/ -> tests -> repo_root
    return Path(__file__).resolve().parents[2]


@pytest.fixture(scope="session")
def venv_python(repo_root: Path) -> str:
    # Prefer Windows path; fall back to POSIX for portability
    win_path = repo_root / ".venv" / "Scripts" / "python.exe"
    posix_path = repo_root / ".venv" / "bin" / "python"
    if win_path.exists():
        return str(win_path)
    if posix_path.exists():
        return str(posix_path)
    return sys.executable


@pytest.fixture(scope="function")
def tmp_db_url(tmp_path: Path) -> str:
    # absolute URL so child processes open the same file
    return f"sqlite:///{(tmp_path / 'kgd_e2e.db').resolve().as_posix()}"


def run_cli(args: list[str], cwd: Path, env: dict | None = None) -> subprocess.CompletedProcess:
    merged_env = dict(os.environ)
    # Ensure Python can import modules from the repo root (kgd/, db/, scripts/)
    py_path = merged_env.get("PYTHONPATH", "")
    sep = ";" if os.name == "nt" else ":"
    if str(cwd) not in (py_path.split(sep) if py_path else []):
        merged_env["PYTHONPATH"] = (py_path + (sep if py_path else "") + str(cwd))
    merged_env.pop("KGD_DB_URL", None)
    if env:
        merged_env.update(env)
    return subprocess.run(args, cwd=str(cwd), capture_output=True, text=True, env=merged_env)


@pytest.fixture
def cli(repo_root: Path):
    def _runner(argv: list[str], env: dict | None = None):
        return run_cli(argv, repo_root, env=env)
    return _runner


def write_tent_data(path: Path, n: int, seed: int, dim: int = 1) -> Path:
    """Noisy samples of the tent (d = 1) or of a smooth bump (d > 1), one row per sample."""
    rng = np.random.default_rng(seed)
    x = rng.random((n, dim))
    if dim == 1:
        f = np.where(x[:, 0] <= 0.5, x[:, 0], 1.0 - x[:, 0])
    else:
        f = np.exp(-np.sum((x - 0.5) ** 2, axis=1))
    y = f + rng.normal(0.0, 0.3, n)
    np.savetxt(path, np.column_stack([x, y]), delimiter=",", fmt="%.10f")
    return path


@pytest.fixture
def data_file(tmp_path: Path):
    def _make(name: str, n: int, seed: int, dim: int = 1) -> Path:
        return write_tent_data(tmp_path / name, n, seed, dim)
    return _make
