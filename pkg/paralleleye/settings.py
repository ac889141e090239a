"""
Django settings for paralleleye project.

The project has no web surface: Django provides the app registry, the
management commands that drive the pipeline, logging configuration and the
test runner.

For more information on this file, see
https://docs.djangoproject.com/en/5.0/topics/settings/
"""

import os
from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# only used by django internals (signing); nothing here is served
SECRET_KEY = os.environ.get('PARALLELEYE_SECRET_KEY', 'paralleleye-batch-pipeline-not-served')

DEBUG = False

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'mapio',
    'worldgen',
    'render',
    'groundtruth',
    'dataset',
    'evaluation',
    'cli',
]

# datasets live on disk, not in a database
DATABASES = {}

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True


# Logging
# https://docs.djangoproject.com/en/5.0/topics/logging/

LOG_LEVEL = os.environ.get('PARALLELEYE_LOG_LEVEL', 'INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'pipeline': {
            'format': '{asctime} {levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'pipeline',
        },
    },
    'loggers': {
        app: {'handlers': ['console'], 'level': LOG_LEVEL, 'propagate': False}
        for app in ['paralleleye', *INSTALLED_APPS]
    },
}


# Pipeline defaults, see paralleleye.conf for the accessor.
# Command-line flags and --config files override these per run.

PARALLELEYE = {
    'SEED': 20170924,
    'RESOLUTION': (640, 480),
    'FOV_H': 60.0,
    'CAMERA_HEIGHT': 1.5,
    'EGO_SPEED': 8.0,
    'DT': 0.1,
    'NEAR': 0.5,
    'FOG_BETA': 0.008,
    'LOD_DISTANCES': (50.0, 120.0),
    'CLASS_THRESHOLDS': (1024, 9216, 0.1, 0.35),
    'MIN_VISIBLE_PIXELS': 20,
    'MIN_BOX_SIDE': 2,
    'JOBS': 1,
    'RENDER_BANDS': 1,
}
