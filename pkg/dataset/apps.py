from django.apps import AppConfig


class DatasetConfig(AppConfig):
    name = 'dataset'
    verbose_name = 'dataset files and surgery'
