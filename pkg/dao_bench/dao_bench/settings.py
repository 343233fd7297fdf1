"""
Settings for the dao_bench project.

Everything the outlier detection apps read lives under the DAO_* names below.
Values that change between machines (threads, directories, log level) can be
overridden with environment variables of the same name.
"""

import os
from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Only management commands and tests run here, there is no web surface.
SECRET_KEY = os.getenv("DAO_SECRET_KEY", "dao-bench-not-served")

DEBUG = False

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'outliers',
    'benchmark',
]

TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.django.DjangoTemplates',
        'DIRS': [],
        'APP_DIRS': True,
        'OPTIONS': {
            'autoescape': True,
        },
    },
]

# No persistence: records are CSV files, not rows.
DATABASES = {}


# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = True

USE_TZ = True


# Logging

DAO_LOG_LEVEL = os.getenv("DAO_LOG_LEVEL", "INFO")

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'plain': {
            'format': '{levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'plain',
        },
    },
    'loggers': {
        'outliers': {
            'handlers': ['console'],
            'level': DAO_LOG_LEVEL,
            'propagate': False,
        },
        'benchmark': {
            'handlers': ['console'],
            'level': DAO_LOG_LEVEL,
            'propagate': False,
        },
    },
}


# Outlier detection

# LID estimates are clamped to [DAO_ID_FLOOR, DAO_ID_CAP_FACTOR * d].
DAO_ID_FLOOR = 0.05
DAO_ID_CAP_FACTOR = 4

DAO_TLE_ENABLED = True
DAO_TLE_EPSILON = 1e-4

# 'brute' or 'kdtree'; both give identical graphs.
DAO_KNN_METHOD = os.getenv("DAO_KNN_METHOD", "brute")
DAO_KDTREE_LEAF_SIZE = 16

# 0 means one worker per CPU.
DAO_THREADS = int(os.getenv("DAO_THREADS", 0))

DAO_CACHE_DIR = Path(os.getenv("DAO_CACHE_DIR", BASE_DIR / 'cache'))
DAO_OUTPUT_DIR = Path(os.getenv("DAO_OUTPUT_DIR", BASE_DIR / 'output'))

# (start, stop, step), stop inclusive.
DAO_DETECTOR_K_RANGE = (5, 100, 1)
DAO_LID_K_GRID = (5, 10, 15, 30, 50, 90, 150, 260, 320, 450, 560, 780)
DAO_ANALYSIS_LID_K = 50
DAO_MORANS_K_RANGE = (5, 100)
# 'knn' or 'symmetric'
DAO_MORANS_WEIGHTS = 'knn'

DAO_DISTINCT_WARNING_FRACTION = 0.20
DAO_NEMENYI_ALPHA = 0.05
DAO_SYNTH_RETRY_CAP = 1000

DAO_LABEL_TOKENS = {
    'outlier': ['1'],
    'inlier': ['0'],
}
