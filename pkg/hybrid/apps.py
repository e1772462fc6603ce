from django.apps import AppConfig


class HybridConfig(AppConfig):
    name = 'hybrid'
