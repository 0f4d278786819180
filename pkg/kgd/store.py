"""Persist per-repetition rule outcomes in the results database."""
from __future__ import annotations

import logging
import math
from typing import List, Optional, Sequence

from sqlalchemy import select
from sqlalchemy.exc import SQLAlchemyError
from sqlalchemy.orm import Session

from db.models import BenchmarkRun, RepOutcomeRow
from kgd.benchmark import RepOutcome
from kgd.config import ExperimentConfig, flatten_experiment_config
from kgd.errors import KgdResultsIOError

_log = logging.getLogger(__name__)


def _nullable_float(v: Optional[float]) -> Optional[float]:
    # NaN is not portable across backends
    if v is None or math.isnan(v):
        return None
    return float(v)


def record_run(config: ExperimentConfig, outcomes: Sequence[RepOutcome], session: Session) -> int:
    """Insert one benchmark_run row plus one rep_outcome row per outcome; commits and returns the run id."""
    run = BenchmarkRun(
        scenario=config.scenario,
        master_seed=config.master_seed,
        reps=config.reps,
        n_grid=list(config.n_grid),
        rules=list(config.rules),
        config=flatten_experiment_config(config),
    )
    run.outcomes = [
        RepOutcomeRow(
            n=o.n,
            rep=o.rep,
            rule=o.rule,
            t_hat=o.t_hat,
            test_mse=_nullable_float(o.test_mse),
            oracle_distance=_nullable_float(o.oracle_distance),
            truncated=bool(o.truncated),
            constant=_nullable_float(o.constant),
            error=o.error,
        )
        for o in outcomes
    ]
    try:
        session.add(run)
        session.commit()
    except SQLAlchemyError as e:
        session.rollback()
        raise KgdResultsIOError(f"cannot record benchmark run: {e}") from e
    _log.info("recorded run %d (%d outcomes)", run.id, len(outcomes))
    return int(run.id)


def load_outcomes(run_id: int, session: Session) -> List[RepOutcome]:
    """Outcomes of a stored run ordered by n, rep, then the run's rule order."""
    try:
        if session.get(BenchmarkRun, run_id) is None:
            raise KgdResultsIOError(f"no benchmark run with id {run_id}")
        rows = session.scalars(
            select(RepOutcomeRow)
            .where(RepOutcomeRow.run_id == run_id)
            .order_by(RepOutcomeRow.n, RepOutcomeRow.rep, RepOutcomeRow.id)
        ).all()
    except SQLAlchemyError as e:
        raise KgdResultsIOError(f"cannot load run {run_id}: {e}") from e
    return [
        RepOutcome(
            rule=r.rule,
            n=r.n,
            rep=r.rep,
            t_hat=r.t_hat,
            test_mse=r.test_mse,
            oracle_distance=r.oracle_distance,
            truncated=bool(r.truncated),
            constant=r.constant,
            error=r.error,
        )
        for r in rows
    ]
