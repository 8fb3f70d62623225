"""
Django settings for the defaults-miner project.

The project has no HTTP surface; Django provides settings, logging
configuration and the management-command CLI.

For more information on this file, see
https://docs.djangoproject.com/en/5.0/topics/settings/
"""

from pathlib import Path
from decouple import Csv, config

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = config('SECRET_KEY', default='django-insecure-defaults-miner-local-only')

DEBUG = config('DEBUG', default=False, cast=bool)


# Application definition

INSTALLED_APPS = [
    # Third party apps
    'rest_framework',

    # Local apps
    'defaults_miner',
]

# No models, no database.
DATABASES = {}


# Internationalization
# https://docs.djangoproject.com/en/5.0/topics/i18n/

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True

# =================================================================
# DJANGO REST FRAMEWORK CONFIGURATION
# =================================================================

# Serializers only: artifact schemas and config validation.
REST_FRAMEWORK = {
    'DEFAULT_RENDERER_CLASSES': [
        'rest_framework.renderers.JSONRenderer',
    ],
    'DEFAULT_PARSER_CLASSES': [
        'rest_framework.parsers.JSONParser',
    ],
    'COERCE_DECIMAL_TO_STRING': False,
}

# =================================================================
# EXPERIMENT DEFAULTS
# =================================================================

# Every key can be overridden with DEFAULTS_MINER_<KEY> in the environment
# or a .env file, then by a --config file, then by command-line flags.
DEFAULTS_MINER = {
    'SEED': config('DEFAULTS_MINER_SEED', default=0, cast=int),
    'FOLDS': config('DEFAULTS_MINER_FOLDS', default=10, cast=int),
    'REPLICATIONS': config('DEFAULTS_MINER_REPLICATIONS', default=5, cast=int),
    'SAMPLE_SIZES': config('DEFAULTS_MINER_SAMPLE_SIZES', default='11,31,51,71', cast=Csv(int)),
    'K': config('DEFAULTS_MINER_K', default=51, cast=int),
    'PSO_SEEDS': config('DEFAULTS_MINER_PSO_SEEDS', default=10, cast=int),
    'BUDGET': config('DEFAULTS_MINER_BUDGET', default=300, cast=int),
    'POPULATION': config('DEFAULTS_MINER_POPULATION', default=10, cast=int),
    'MAX_ITERATIONS': config('DEFAULTS_MINER_MAX_ITERATIONS', default=30, cast=int),
    'INFORMANT_COUNT': config('DEFAULTS_MINER_INFORMANT_COUNT', default=3, cast=int),
    'RS_BUDGET': config('DEFAULTS_MINER_RS_BUDGET', default=300, cast=int),
    'JOBS': config('DEFAULTS_MINER_JOBS', default=1, cast=int),
    'ALPHA': config('DEFAULTS_MINER_ALPHA', default=0.05, cast=float),
    'SELECTION': config('DEFAULTS_MINER_SELECTION', default='oracle'),
    'PAIRING': config('DEFAULTS_MINER_PAIRING', default='replications'),
    'MAX_DEPTH': config('DEFAULTS_MINER_MAX_DEPTH', default=4, cast=int),
    'MIN_LEAF': config('DEFAULTS_MINER_MIN_LEAF', default=3, cast=int),
    'MIN_CLASS_SIZE': config('DEFAULTS_MINER_MIN_CLASS_SIZE', default=10, cast=int),
    'MISSING_TOKEN': config('DEFAULTS_MINER_MISSING_TOKEN', default='?'),
    'DELIMITER': config('DEFAULTS_MINER_DELIMITER', default=','),
    'BIN_WIDTH': config('DEFAULTS_MINER_BIN_WIDTH', default=0.05, cast=float),
    'MAX_SECONDS': config('DEFAULTS_MINER_MAX_SECONDS', default=None),
}

# =================================================================
# LOGGING CONFIGURATION
# =================================================================

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {name} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'defaults_miner': {
            'handlers': ['console'],
            'level': config('DEFAULTS_MINER_LOG_LEVEL', default='INFO'),
            'propagate': False,
        },
    },
}
