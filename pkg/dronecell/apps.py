from django.apps import AppConfig


class DronecellConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "dronecell"
    verbose_name = "UAV-assisted green small cells"
