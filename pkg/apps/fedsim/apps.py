from django.apps import AppConfig


class FedsimConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.fedsim'
    verbose_name = 'Federated Simulation'
