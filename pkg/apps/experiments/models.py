import uuid
from django.db import models


class RunKind(models.TextChoices):
    RUN = 'RUN', 'Single Run'
    SWEEP_CELL = 'SWEEP_CELL', 'Sweep Cell'
    CALIBRATE = 'CALIBRATE', 'Calibration'


class RunStatus(models.TextChoices):
    PENDING = 'PENDING', 'Pending'
    RUNNING = 'RUNNING', 'Running'
    COMPLETED = 'COMPLETED', 'Completed'
    FAILED = 'FAILED', 'Failed'


class ExperimentRun(models.Model):
    """
    Ledger entry for one seeded experiment execution.

    Results live in output_dir; the row only records what ran, with which
    seed, and how it ended.
    """
    id = models.UUIDField(primary_key=True, default=uuid.uuid4, editable=False)
    kind = models.CharField(max_length=20, choices=RunKind.choices, default=RunKind.RUN)
    status = models.CharField(max_length=20, choices=RunStatus.choices, default=RunStatus.PENDING)

    config = models.JSONField(default=dict)
    # Seeds span the full unsigned 64-bit range, past a signed BIGINT
    master_seed = models.DecimalField(max_digits=20, decimal_places=0, default=0)
    output_dir = models.CharField(max_length=500, blank=True)

    final_metrics = models.JSONField(default=dict, blank=True)
    error = models.TextField(blank=True)

    created_at = models.DateTimeField(auto_now_add=True)
    completed_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        ordering = ['-created_at']
        verbose_name = 'Experiment Run'
        verbose_name_plural = 'Experiment Runs'

    def __str__(self):
        return f"{self.kind} seed={self.master_seed} ({self.status})"
