"""
Celery configuration for the ghostfl simulator.

Workers execute sweep cells (apps.experiments.tasks.run_sweep_cell); there is
no beat schedule.
"""
import os
from celery import Celery

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'config.settings')

app = Celery('ghostfl')
app.config_from_object('django.conf:settings', namespace='CELERY')
app.autodiscover_tasks()
