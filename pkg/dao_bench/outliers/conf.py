"""App-level defaults for the DAO_* settings.

Projects override any of these in their settings module. Lookups go through
``setting()`` so the library also works under a bare ``settings.configure()``.
"""
import os
from typing import Any

from django.conf import settings

DEFAULTS = {
    'DAO_ID_FLOOR': 0.05,
    'DAO_ID_CAP_FACTOR': 4,
    'DAO_TLE_ENABLED': True,
    'DAO_TLE_EPSILON': 1e-4,
    'DAO_KNN_METHOD': 'brute',
    'DAO_KDTREE_LEAF_SIZE': 16,
    'DAO_THREADS': 0,
    'DAO_CACHE_DIR': 'cache',
    'DAO_OUTPUT_DIR': 'output',
    'DAO_DETECTOR_K_RANGE': (5, 100, 1),
    'DAO_LID_K_GRID': (5, 10, 15, 30, 50, 90, 150, 260, 320, 450, 560, 780),
    'DAO_ANALYSIS_LID_K': 50,
    'DAO_MORANS_K_RANGE': (5, 100),
    'DAO_MORANS_WEIGHTS': 'knn',
    'DAO_DISTINCT_WARNING_FRACTION': 0.20,
    'DAO_NEMENYI_ALPHA': 0.05,
    'DAO_SYNTH_RETRY_CAP': 1000,
    'DAO_LABEL_TOKENS': {'outlier': ['1'], 'inlier': ['0']},
}


def setting(name: str) -> Any:
    return getattr(settings, name, DEFAULTS[name])


def thread_count(threads: int | None = None) -> int:
    """Resolve a worker count: explicit value, then DAO_THREADS, then CPUs."""
    if threads is None or threads <= 0:
        threads = setting('DAO_THREADS')
    if not threads or threads <= 0:
        threads = os.cpu_count() or 1
    return int(threads)
