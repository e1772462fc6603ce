"""
Django settings for the qunlearn project.

The project hosts no web surface: apps expose numerical services and
management commands, so only the framework pieces those need are installed.

For more information on this file, see
https://docs.djangoproject.com/en/5.1/topics/settings/
"""

import os
import environ
from pathlib import Path

env = environ.Env(
    DEBUG=(bool, False),
    QUNL_THREADS=(int, 0),
    QUNL_LOG_LEVEL=(str, 'INFO'),
)

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Reading the .env file
environ.Env.read_env(BASE_DIR / '.env')

# SECURITY WARNING: nothing is served, the key only satisfies the framework
SECRET_KEY = env('SECRET_KEY', default='qunlearn-local-only')

DEBUG = env('DEBUG')

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    # local apps
    'diffcore',
    'qsim',
    'hybrid',
    'data',
    'train',
    'unlearn',
    'metrics',
    'runner',

    # third party
    'rest_framework',
]

MIDDLEWARE = []

# No models live in this project
DATABASES = {}

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True

# REST Framework settings (serializers are used for config validation only)
REST_FRAMEWORK = {
    'UNAUTHENTICATED_USER': None,
}

# Worker pool and file locations
QUNL_THREADS = env('QUNL_THREADS') or (os.cpu_count() or 1)

DATA_DIR = Path(env('QUNL_DATA_DIR', default=str(BASE_DIR / 'datasets')))
OUTPUT_DIR = Path(env('QUNL_OUTPUT_DIR', default=str(BASE_DIR / 'reports')))

DATASET_FILES = {
    'iris': {
        'csv': BASE_DIR / 'data' / 'fixtures' / 'iris.csv',
    },
    'mnist': {
        'images': DATA_DIR / 'mnist' / 'train-images-idx3-ubyte.gz',
        'labels': DATA_DIR / 'mnist' / 'train-labels-idx1-ubyte.gz',
    },
    'fashion': {
        'images': DATA_DIR / 'fashion' / 'train-images-idx3-ubyte.gz',
        'labels': DATA_DIR / 'fashion' / 'train-labels-idx1-ubyte.gz',
    },
}

# Protocol defaults
ARCH_DEFAULTS = {
    'iris': {'qubits': 4, 'layers': 2, 'conv_channels': (), 'head_hidden': 0},
    'mnist': {'qubits': 6, 'layers': 2, 'conv_channels': (8, 16), 'head_hidden': 0},
    'fashion': {'qubits': 10, 'layers': 3, 'conv_channels': (16, 32), 'head_hidden': 32},
}

DATA_PRESETS = {
    'desk': {'iris': None, 'mnist': 50, 'fashion': 50},
    'large': {'iris': None, 'mnist': 200, 'fashion': 800},
}

TEST_FRACTION = 0.2

TRAIN_DEFAULTS = {
    'max_epochs': 100,
    'patience': 10,
    'lr': 1e-3,
    'batch_size': {'iris': 16, 'mnist': 32, 'fashion': 32},
}

UNLEARN_DEFAULTS = {
    'max_epochs': 25,
    'patience': 5,
    'lr': 5e-4,
    'alpha': 0.9,
    'k': 1,
    'eps_adv': 0.1,
    'sigma_noise': 0.01,
    'lambda_fisher': 1e-4,
    'fisher_cap': 1e3,
    'scrub_max_steps': 2,
    'ga_clip': 10.0,
    'kl_direction': 'forward',
}

# per-method values applied over UNLEARN_DEFAULTS, below an experiment's own overrides;
UNLEARN_METHOD_DEFAULTS = {
    'EU-k': {'lr': 5e-3},
}

UTILITY_EPSILON = 0.1

DEFAULT_SEEDS = [0, 1, 2]

CACHES = {
    'default': {
        'BACKEND': 'django.core.cache.backends.locmem.LocMemCache',
        'LOCATION': 'qunlearn-datasets',
        'TIMEOUT': None,
        'OPTIONS': {
            'MAX_ENTRIES': 32,
        },
    }
}

LOG_LEVEL = env('QUNL_LOG_LEVEL')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {process:d} {thread:d} {message}',
            'style': '{',
        },
        'simple': {
            'format': '{levelname} {asctime} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
        'file': {
            'class': 'logging.FileHandler',
            'filename': os.path.join(BASE_DIR, 'logs/qunlearn.log'),
            'formatter': 'verbose',
        },
    },
    'loggers': {
        '': {  # Root logger
            'handlers': ['console', 'file'],
            'level': LOG_LEVEL,
        },
        'runner': {
            'handlers': ['console', 'file'],
            'level': LOG_LEVEL,
            'propagate': False,
        },
        'unlearn': {
            'handlers': ['file'],
            'level': LOG_LEVEL,
            'propagate': False,
        },
    }
}

# Create logs directory if it doesn't exist
LOGS_DIR = os.path.join(BASE_DIR, 'logs')
if not os.path.exists(LOGS_DIR):
    os.makedirs(LOGS_DIR)
