from django.apps import AppConfig


class WorldgenConfig(AppConfig):
    name = 'worldgen'
    verbose_name = 'world generation'
