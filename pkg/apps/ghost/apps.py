from django.apps import AppConfig


class GhostConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.ghost'
    verbose_name = 'Ghost Neurons'
