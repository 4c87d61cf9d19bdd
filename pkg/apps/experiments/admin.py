from django.contrib import admin
from .models import ExperimentRun


@admin.register(ExperimentRun)
class ExperimentRunAdmin(admin.ModelAdmin):
    list_display = ['id', 'kind', 'status', 'master_seed', 'output_dir', 'created_at', 'completed_at']
    list_filter = ['kind', 'status']
    search_fields = ['output_dir', 'error']
    readonly_fields = ['config', 'final_metrics', 'created_at', 'completed_at']
