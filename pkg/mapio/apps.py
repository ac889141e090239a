from django.apps import AppConfig


class MapioConfig(AppConfig):
    name = 'mapio'
    verbose_name = 'map import'
