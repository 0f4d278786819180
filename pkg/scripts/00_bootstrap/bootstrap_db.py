#!/usr/bin/env python3
"""Results database bootstrapper

Creates or upgrades the results database schema to the latest Alembic revision.

- Uses Alembic migrations by default (no destructive operations)
- Accepts --db-url to override the target DB (else KGD_DB_URL, else data/kgd_results.db)
- Falls back to SQLAlchemy metadata create_all if the Alembic upgrade fails

Examples:
  python scripts/00_bootstrap/bootstrap_db.py --db-url sqlite:///./data/kgd_results.db
  python scripts/00_bootstrap/bootstrap_db.py --use-metadata
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

PROJECT_ROOT = Path(__file__).resolve().parents[2]
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from sqlalchemy import create_engine, inspect
from sqlalchemy.exc import SQLAlchemyError

from db.models import Base
from db.session import ensure_sqlite_dir, resolve_db_url


def _run_alembic_upgrade_head(db_url: str, project_root: Path) -> int:
    from alembic import command
    from alembic.config import Config
    from alembic.util.exc import CommandError

    ini_path = project_root / "alembic.ini"
    if not ini_path.is_file():
        print(f"[error] alembic.ini not found at {ini_path}")
        return 2

    cfg = Config(str(ini_path))
    cfg.set_main_option("script_location", str(project_root / "alembic"))
    cfg.set_main_option("sqlalchemy.url", db_url)
    print("Running Alembic upgrade to head...")
    try:
        command.upgrade(cfg, "head")
    except (CommandError, SQLAlchemyError) as e:
        print(f"[warn] Alembic upgrade failed: {e}")
        return 2
    print("Alembic upgrade complete.")
    return 0


def _create_with_metadata(db_url: str, echo: bool = False) -> int:
    print("Creating tables via SQLAlchemy metadata (create_all)...")
    engine = create_engine(db_url, echo=echo, future=True)
    try:
        existing = set(inspect(engine).get_table_names())
        for table in Base.metadata.sorted_tables:
            if table.name in existing:
                print(f"[bootstrap][info] Table '{table.name}' already exists; skipping")
                continue
            table.create(bind=engine, checkfirst=True)
    finally:
        engine.dispose()
    print("Metadata create_all complete.")
    return 0


def parse_args(argv: list[str]) -> argparse.Namespace:
    ap = argparse.ArgumentParser(description="Bootstrap/upgrade the results database schema")
    ap.add_argument("--db-url", dest="db_url", default=None,
                    help="Target database URL (default: $KGD_DB_URL, else sqlite:///./data/kgd_results.db)")
    ap.add_argument("--use-metadata", action="store_true",
                    help="Use SQLAlchemy Base.metadata.create_all instead of Alembic")
    ap.add_argument("--echo", action="store_true", help="Echo SQL statements (metadata mode)")
    return ap.parse_args(argv)


def main(argv: list[str]) -> int:
    args = parse_args(argv)
    db_url = resolve_db_url(args.db_url)
    print(f"Target DB URL: {db_url}")
    ensure_sqlite_dir(db_url)

    if args.use_metadata:
        return _create_with_metadata(db_url, echo=args.echo)

    rc = _run_alembic_upgrade_head(db_url, PROJECT_ROOT)
    if rc != 0:
        print("[warn] Falling back to SQLAlchemy metadata create_all...")
        return _create_with_metadata(db_url, echo=args.echo)
    return 0


if __name__ == "__main__":
    raise SystemExit(main(sys.argv[1:]))
