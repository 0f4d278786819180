"""Results database: SQLAlchemy models and session management.

Re-exports the commonly used symbols (e.g. `from db import get_session`).
"""
from .models import Base, BenchmarkRun, RepOutcomeRow  # noqa: F401
from .session import get_session, reconfigure, resolve_db_url  # noqa: F401

__all__ = ["Base", "BenchmarkRun", "RepOutcomeRow", "get_session", "reconfigure", "resolve_db_url"]
