from django.apps import AppConfig


class OutliersConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'outliers'
    verbose_name = 'Dimensionality-aware outlier detection'
