"""
Local Task Backend - Synchronous execution for development.

This backend executes tasks immediately in the same process.
No Redis or worker process required.

Usage:
    Set TASK_BACKEND=local in your .env file.
"""

import uuid
import logging
from typing import Any, Dict, List
from apps.core.task_service import TaskServiceInterface

logger = logging.getLogger(__name__)


# Task handler registry - maps task names to handler functions.
# Apps register their handlers at startup (see AppConfig.ready).
TASK_HANDLERS = {}

# Results of executed tasks, keyed by task id
TASK_RESULTS: Dict[str, Any] = {}


def register_handler(task_name: str):
    """Decorator to register a task handler."""
    def decorator(func):
        TASK_HANDLERS[task_name] = func
        return func
    return decorator


class LocalTaskService(TaskServiceInterface):
    """
    Execute tasks synchronously in the same process.

    This is ideal for:
    - Single-core desk-scale runs
    - Unit testing with immediate execution
    - Debugging task logic

    Note: Tasks run one after another inside send_task, so a sweep
    dispatched locally is strictly sequential.
    """

    def send_task(self, task_name: str, payload: Dict[str, Any]) -> str:
        """Execute task synchronously."""
        task_id = str(uuid.uuid4())

        logger.info(f"[LOCAL] Executing task {task_name} (id={task_id})")

        handler = TASK_HANDLERS.get(task_name)
        if handler is None:
            logger.error(f"[LOCAL] No handler registered for task: {task_name}")
            raise ValueError(f"No handler registered for task: {task_name}")

        try:
            TASK_RESULTS[task_id] = handler(**payload)
            logger.info(f"[LOCAL] Task {task_name} completed (id={task_id})")
        except Exception as e:
            logger.exception(f"[LOCAL] Task {task_name} failed: {e}")
            raise

        return task_id

    def collect(self, task_ids: List[str]) -> List[Any]:
        """Results are already available; pop them in submission order."""
        return [TASK_RESULTS.pop(task_id, None) for task_id in task_ids]
