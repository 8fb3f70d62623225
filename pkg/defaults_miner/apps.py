from django.apps import AppConfig


class DefaultsMinerConfig(AppConfig):
    name = 'defaults_miner'
    verbose_name = 'Optimized SVM defaults'
