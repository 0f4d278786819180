from __future__ import annotations

import os
import threading
from collections.abc import Generator
from contextlib import contextmanager
from pathlib import Path

from sqlalchemy import create_engine, event
from sqlalchemy.engine import Engine
from sqlalchemy.engine.url import make_url
from sqlalchemy.exc import ArgumentError
from sqlalchemy.orm import Session, sessionmaker
from sqlalchemy.pool import NullPool

ROOT = Path(__file__).resolve().parents[1]

DB_URL_ENV = "KGD_DB_URL"
DEFAULT_DB_URL = "sqlite:///./data/kgd_results.db"


def normalize_sqlite_url(db_url: str) -> str:
    """Anchor relative sqlite file URLs at the repo root so every process opens the same file."""
    try:
        url = make_url(db_url)
    except ArgumentError:
        return db_url
    if url.get_backend_name() != "sqlite":
        return db_url
    db_path = url.database or ""
    if db_path in ("", ":memory:"):
        return db_url
    p = Path(db_path)
    if p.is_absolute():
        return db_url
    return url.set(database=str((ROOT / p).resolve())).render_as_string(hide_password=False)


def resolve_db_url(explicit: str | None = None) -> str:
    """--db-url, else KGD_DB_URL, else the default results file."""
    return normalize_sqlite_url(explicit or os.environ.get(DB_URL_ENV) or DEFAULT_DB_URL)


def ensure_sqlite_dir(db_url: str) -> None:
    url = make_url(db_url)
    if url.get_backend_name() == "sqlite" and url.database and url.database != ":memory:":
        Path(url.database).parent.mkdir(parents=True, exist_ok=True)


def _make_engine(db_url: str) -> Engine:
    # NullPool releases SQLite file handles as soon as a session closes
    eng = create_engine(db_url, future=True, poolclass=NullPool)
    if db_url.startswith("sqlite"):
        @event.listens_for(eng, "connect")
        def _set_sqlite_pragma(dbapi_connection, connection_record):  # type: ignore[override]
            cursor = dbapi_connection.cursor()
            cursor.execute("PRAGMA foreign_keys=ON")
            cursor.close()
    return eng


DB_URL = resolve_db_url()
engine = _make_engine(DB_URL)
SessionLocal = sessionmaker(bind=engine, autoflush=False, autocommit=False, class_=Session)

# URLs whose schema has been created in this process
_SCHEMA_VERIFIED: set[str] = set()
_reconfigure_lock = threading.Lock()


def reconfigure(db_url: str) -> None:
    """Point the module engine/session factory at another database."""
    global DB_URL, engine, SessionLocal
    with _reconfigure_lock:
        engine.dispose()
        DB_URL = normalize_sqlite_url(db_url)
        engine = _make_engine(DB_URL)
        SessionLocal = sessionmaker(bind=engine, autoflush=False, autocommit=False, class_=Session)


@contextmanager
def get_session() -> Generator[Session, None, None]:
    # lazily create the schema once per URL; Alembic remains the upgrade path
    if DB_URL not in _SCHEMA_VERIFIED:
        from db.models import Base as _Base

        ensure_sqlite_dir(DB_URL)
        _Base.metadata.create_all(bind=engine)
        _SCHEMA_VERIFIED.add(DB_URL)
    session = SessionLocal()
    try:
        yield session
    finally:
        session.close()
