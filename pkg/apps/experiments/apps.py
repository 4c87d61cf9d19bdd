from django.apps import AppConfig


class ExperimentsConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.experiments'
    verbose_name = 'Experiments'

    def ready(self):
        # Registers the local-backend handler for sweep cells
        from . import tasks  # noqa: F401
