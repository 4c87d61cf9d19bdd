"""
Sweep-cell tasks.

execute_cell runs one cell in-process; it is registered with the local task
backend and wrapped as a Celery task for the celery backend. Both receive the
JSON cell document built by sweep_service.build_cells.
"""
import logging
from dataclasses import asdict
from typing import Any, Dict

from celery import shared_task

from apps.core.backends.local_backend import register_handler
from .models import RunKind
from .services import parse_experiment_config, run_experiment

logger = logging.getLogger(__name__)


@register_handler("run_sweep_cell")
def execute_cell(cell: Dict[str, Any]) -> Dict[str, Any]:
    """Run one sweep cell and return its summary row."""
    name = cell['name']
    try:
        config = parse_experiment_config(cell['config'])
        result = run_experiment(config, output_dir=cell['output_dir'], kind=RunKind.SWEEP_CELL)
    except Exception as e:
        logger.error(f"Sweep cell {name} failed: {e}")
        raise

    row = {'axis': cell['axis'], 'value': cell['value'], 'seed': cell['seed'], 'output_dir': cell['output_dir']}
    if result.records:
        row.update(asdict(result.records[-1]))
    row['rounds_to_asr_0.9'] = result.summary['rounds_to_asr_0.9']
    return row


@shared_task(name="apps.experiments.tasks.run_sweep_cell")
def run_sweep_cell(cell):
    return execute_cell(cell)
