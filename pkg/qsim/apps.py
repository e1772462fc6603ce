from django.apps import AppConfig


class QsimConfig(AppConfig):
    name = 'qsim'
