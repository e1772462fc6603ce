from django.apps import AppConfig


class UnlearnConfig(AppConfig):
    name = 'unlearn'
