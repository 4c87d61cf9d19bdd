"""
Run ledger.

open_run() and close_run() record every run, sweep cell and calibration in
ExperimentRun. Both are fire-and-forget: they never raise, so an unmigrated
or unreachable database only costs the ledger row, never the run.

Usage:
    from apps.experiments.run_ledger import open_run, close_run

    run_id = open_run(kind=RunKind.RUN, config=config_dict, master_seed=7, output_dir="results/run-seed7")
    ...
    close_run(run_id, RunStatus.COMPLETED, final_metrics={"ba": 0.97})
"""
import logging
from typing import Optional
from uuid import UUID

from django.utils import timezone

from .models import ExperimentRun, RunStatus

logger = logging.getLogger(__name__)


def open_run(*, kind: str, config: dict, master_seed: int, output_dir: str) -> Optional[UUID]:
    """Create a RUNNING ledger row; returns its id, or None if it could not be written."""
    try:
        run = ExperimentRun.objects.create(
            kind=kind,
            status=RunStatus.RUNNING,
            config=config,
            master_seed=master_seed,
            output_dir=output_dir,
        )
        return run.id
    except Exception as e:
        logger.warning(f"Run ledger unavailable, continuing without it: {e}")
        return None


def close_run(run_id: Optional[UUID], status: str, final_metrics: Optional[dict] = None, error: str = "") -> None:
    if run_id is None:
        return
    try:
        ExperimentRun.objects.filter(id=run_id).update(
            status=status,
            final_metrics=final_metrics or {},
            error=error,
            completed_at=timezone.now(),
        )
    except Exception as e:
        logger.warning(f"Could not close ledger row {run_id}: {e}")
