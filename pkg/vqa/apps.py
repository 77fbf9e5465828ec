from django.apps import AppConfig


class VqaConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'vqa'
    verbose_name = 'Relation-graph VQA'
