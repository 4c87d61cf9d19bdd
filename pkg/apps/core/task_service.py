"""
TaskService - Abstraction layer for sweep task execution.

This module provides a platform-agnostic interface for executing experiment
tasks. The actual backend is determined by the TASK_BACKEND environment variable.

Usage:
    from apps.core.task_service import TaskService

    # Queue one sweep cell and wait for every queued cell
    task_id = TaskService.run_sweep_cell(cell={...})
    results = TaskService.collect([task_id])

Environment Configuration:
    TASK_BACKEND=local   # Sync execution (development, tests)
    TASK_BACKEND=celery  # Celery + Redis (parallel sweep cells)
"""

import os
import logging
from abc import ABC, abstractmethod
from typing import Any, Dict, List

logger = logging.getLogger(__name__)


class TaskServiceInterface(ABC):
    """
    Abstract interface for task execution.

    Implementations:
    - LocalTaskService: Sync execution for development/testing
    - CeleryTaskService: Celery + Redis worker pool
    """

    @abstractmethod
    def send_task(self, task_name: str, payload: Dict[str, Any]) -> str:
        """
        Queue a task for execution.

        Args:
            task_name: Identifier for the task handler
            payload: JSON-serializable data to pass to the task

        Returns:
            Task ID for tracking
        """
        pass

    @abstractmethod
    def collect(self, task_ids: List[str]) -> List[Any]:
        """
        Block until every task has finished and return the results.

        Results come back in the order of task_ids, regardless of the order
        in which the tasks completed.
        """
        pass


def _get_backend() -> TaskServiceInterface:
    """Get the configured task backend based on TASK_BACKEND env var."""
    backend = os.getenv('TASK_BACKEND', 'local')

    if backend == 'local':
        from apps.core.backends.local_backend import LocalTaskService
        return LocalTaskService()
    elif backend == 'celery':
        from apps.core.backends.celery_backend import CeleryTaskService
        return CeleryTaskService()
    else:
        raise ValueError(f"Unknown TASK_BACKEND: {backend}")


class TaskService:
    """
    Facade for sending tasks.

    This class provides static methods for each task type,
    delegating to the configured backend.
    """

    @staticmethod
    def run_sweep_cell(cell: Dict[str, Any]) -> str:
        """
        Queue one sweep cell (a complete seeded experiment run).

        Used by: Experiments app when fanning out a parameter sweep.
        """
        logger.info(f"Queueing run_sweep_cell task for cell {cell.get('name')}")
        return _get_backend().send_task(
            task_name="run_sweep_cell",
            payload={"cell": cell},
        )

    @staticmethod
    def collect(task_ids: List[str]) -> List[Any]:
        """
        Join barrier: wait for the given tasks and return their results.

        Used by: Experiments app before writing the sweep summary.
        """
        logger.info(f"Collecting {len(task_ids)} task results")
        return _get_backend().collect(task_ids)
