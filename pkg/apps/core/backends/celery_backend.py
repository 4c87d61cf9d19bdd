"""
Celery Task Backend - Parallel execution via Celery + Redis.

Sweep cells are independent seeded runs, so a worker pool can execute
them concurrently; collect() is the join barrier.

Usage:
    Set TASK_BACKEND=celery in your .env file.
    Requires Redis and a Celery worker running.
"""

import uuid
import logging
from typing import Any, Dict, List
from apps.core.task_service import TaskServiceInterface

logger = logging.getLogger(__name__)


# Map task names to Celery task paths
CELERY_TASKS = {
    "run_sweep_cell": "apps.experiments.tasks.run_sweep_cell",
}


def _get_celery_task(task_name: str):
    """Get the Celery task function for a task name."""
    task_path = CELERY_TASKS.get(task_name)
    if not task_path:
        raise ValueError(f"No Celery task mapped for: {task_name}")

    from celery import current_app
    return current_app.tasks.get(task_path)


class CeleryTaskService(TaskServiceInterface):
    """
    Execute tasks via Celery + Redis.

    Payloads are passed as keyword arguments, so every payload must be
    JSON-serializable (CELERY_TASK_SERIALIZER = 'json').
    """

    def send_task(self, task_name: str, payload: Dict[str, Any]) -> str:
        """Queue task via Celery."""
        task_id = str(uuid.uuid4())

        logger.info(f"[CELERY] Queueing task {task_name} (id={task_id})")

        task = _get_celery_task(task_name)

        if task is None:
            logger.error(f"[CELERY] Task not found: {task_name}")
            raise ValueError(f"Celery task not found: {task_name}")

        task.apply_async(kwargs=payload, task_id=task_id)

        return task_id

    def collect(self, task_ids: List[str]) -> List[Any]:
        """Wait on every AsyncResult; a failed task re-raises here."""
        from celery.result import AsyncResult

        results = []
        for task_id in task_ids:
            results.append(AsyncResult(task_id).get(propagate=True))
        return results
