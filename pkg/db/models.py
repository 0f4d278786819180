from __future__ import annotations

from sqlalchemy import (
    JSON,
    Boolean,
    Column,
    Float,
    ForeignKey,
    Integer,
    String,
    Text,
    UniqueConstraint,
)
from sqlalchemy.orm import declarative_base, relationship

Base = declarative_base()


class BenchmarkRun(Base):
    __tablename__ = "benchmark_run"

    id = Column(Integer, primary_key=True, index=True)
    scenario = Column(String(16), nullable=False, index=True)
    master_seed = Column(Integer, nullable=False)
    reps = Column(Integer, nullable=False)
    n_grid = Column(JSON, default=list)
    rules = Column(JSON, default=list)
    # flat config echo, same keys as the YAML config file
    config = Column(JSON, default=dict)

    outcomes = relationship("RepOutcomeRow", back_populates="run", cascade="all, delete-orphan")


class RepOutcomeRow(Base):
    __tablename__ = "rep_outcome"
    __table_args__ = (UniqueConstraint("run_id", "n", "rep", "rule", name="uq_rep_outcome_cell_rule"),)

    id = Column(Integer, primary_key=True, index=True)
    run_id = Column(Integer, ForeignKey("benchmark_run.id", ondelete="CASCADE"), nullable=False, index=True)
    n = Column(Integer, nullable=False)
    rep = Column(Integer, nullable=False)
    rule = Column(String(16), nullable=False, index=True)
    # null when the rule failed on this repetition (see error)
    t_hat = Column(Integer, nullable=True)
    test_mse = Column(Float, nullable=True)
    oracle_distance = Column(Float, nullable=True)
    truncated = Column(Boolean, default=False)
    constant = Column(Float, nullable=True)
    error = Column(Text, nullable=True)

    run = relationship("BenchmarkRun", back_populates="outcomes")
