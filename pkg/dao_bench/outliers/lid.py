"""
Per-point local intrinsic dimensionality (LID) estimators.

All estimators read the shared NeighborGraph; TLE additionally needs the
coordinates to measure distances between neighbors. Every estimate is clamped
to [DAO_ID_FLOOR, DAO_ID_CAP_FACTOR * d] so that downstream exponents stay
finite on degenerate neighborhoods.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from django.db import models
from django.utils.translation import gettext_lazy as _
from scipy.spatial.distance import cdist

from .conf import setting, thread_count
from .dataset import Dataset
from .exceptions import ConfigurationError, EstimationError
from .neighbors import NeighborGraph

logger = logging.getLogger(__name__)

ESTIMATOR_K_GRID = (5, 10, 15, 30, 50, 90, 150, 260, 320, 450, 560, 780)


class LidEstimator(models.TextChoices):
    MLE = 'MLE', _('maximum likelihood (Hill)')
    TWONN = 'TwoNN', _('two nearest neighbors')
    TLE = 'TLE', _('tight local estimation')


@dataclass(frozen=True, eq=False)
class LidProfile:
    estimator: str
    k_used: int
    ids: np.ndarray
    log_ids: np.ndarray

    def __post_init__(self):
        if self.ids.shape != self.log_ids.shape:
            raise EstimationError("ids and log_ids must have the same length")
        self.ids.setflags(write=False)
        self.log_ids.setflags(write=False)

    def __str__(self):
        return f"{self.estimator}@k={self.k_used}"

    def __len__(self):
        return len(self.ids)

    @classmethod
    def constant(cls, n: int, value: float = 1.0, estimator: str = 'constant') -> 'LidProfile':
        ids = np.full(n, float(value))
        return cls(estimator, 0, ids, np.log(ids))


def id_bounds(dim: int) -> tuple[float, float]:
    return float(setting('DAO_ID_FLOOR')), float(setting('DAO_ID_CAP_FACTOR') * dim)


def _clamped(estimator: str, k: int, raw: np.ndarray, dim: int) -> LidProfile:
    floor, cap = id_bounds(dim)
    raw = np.where(np.isnan(raw), np.inf, raw)
    outside = int(((raw < floor) | (raw > cap)).sum())
    if outside:
        logger.warning(f"{estimator}@k={k}: clamped {outside} of {len(raw)} estimates to [{floor}, {cap}]")
    ids = np.clip(raw, floor, cap)
    return LidProfile(estimator, int(k), ids, np.log(ids))


def estimator_k_grid(n: int | None = None) -> list[int]:
    """Neighborhood sizes swept for LID estimation, truncated to k <= n - 1."""
    grid = [int(k) for k in setting('DAO_LID_K_GRID')]
    if n is None:
        return grid
    return [k for k in grid if k <= n - 1]


def estimate_mle(graph: NeighborGraph, k: int) -> LidProfile:
    """Hill-type maximum likelihood estimate from the first k neighbor distances.

    ID(i) = -1 / mean_j ln(d_ij / d_ik), the mean taken over j = 1..k (the j = k
    term is zero). A zero mean, i.e. all k distances tied, gives +inf before
    clamping.
    """
    graph.check_k(k, minimum=2)
    prefix = graph.log_distance_prefix[:, k - 1]
    log_kdist = np.log(graph.distances[:, k - 1])
    mean_log_ratio = (prefix - k * log_kdist) / k
    negative = mean_log_ratio < 0
    raw = np.full(graph.n, np.inf)
    np.divide(-1.0, mean_log_ratio, out=raw, where=negative)
    return _clamped(LidEstimator.MLE, k, raw, graph.dim)


def estimate_twonn(graph: NeighborGraph) -> LidProfile:
    """Per-point two-nearest-neighbor estimate ln 2 / ln(d2 / d1)."""
    if graph.kmax < 2:
        raise EstimationError(f"TwoNN needs kmax >= 2, graph has kmax={graph.kmax}")
    log_ratio = np.log(graph.distances[:, 1] / graph.distances[:, 0])
    raw = np.full(graph.n, np.inf)
    np.divide(np.log(2.0), log_ratio, out=raw, where=log_ratio > 0)
    return _clamped(LidEstimator.TWONN, 2, raw, graph.dim)


def _tle_point(neighbors: np.ndarray, dists: np.ndarray, epsilon: float) -> float:
    """Tight local estimate for one query from its k neighbors.

    Every pair of neighbors (i, j) contributes two extra distance samples s_ij
    and t_ij, obtained by reflecting j through the query and through i; the
    estimate is the Hill-type MLE over the neighbor distances plus these.
    """
    k = len(dists)
    r = dists[-1]
    V = cdist(neighbors, neighbors)
    Di = np.repeat(dists[:, None], k, axis=1)
    Dj = Di.T
    Z2 = 2 * Di ** 2 + 2 * Dj ** 2 - V ** 2
    with np.errstate(divide='ignore', invalid='ignore'):
        gap = 2 * (r ** 2 - Di ** 2)
        base_s = Di ** 2 + V ** 2 - Dj ** 2
        base_t = Di ** 2 + Z2 - Dj ** 2
        S = r * (np.sqrt(base_s ** 2 + 4 * V ** 2 * (r ** 2 - Di ** 2)) - base_s) / gap
        T = r * (np.sqrt(base_t ** 2 + 4 * Z2 * (r ** 2 - Di ** 2)) - base_t) / gap
        # neighbors at distance r: the quadratic degenerates to a linear equation
        at_r = dists == r
        S[at_r] = r * V[at_r] ** 2 / (r ** 2 + V[at_r] ** 2 - Dj[at_r] ** 2)
        T[at_r] = r * Z2[at_r] / (r ** 2 + Z2[at_r] - Dj[at_r] ** 2)

        # s_ij and t_ij are kept or dropped together
        keep = (~np.eye(k, dtype=bool) & np.isfinite(S) & np.isfinite(T)
                & (S >= epsilon) & (T >= epsilon))
        keep_d = dists >= epsilon
        total = (np.log(S[keep] / r).sum() + np.log(T[keep] / r).sum()
                 + 2 * np.log(dists[keep_d] / r).sum())
    count = 2 * keep.sum() + 2 * keep_d.sum()
    if total < 0:
        return -count / total
    return np.inf


def estimate_tle(graph: NeighborGraph, dataset: Dataset, k: int,
                 threads: int | None = None) -> LidProfile:
    """Tight local estimation from pairwise distances inside each k-neighborhood.

    Cost is O(n k^2 d); it is the slowest estimator by a wide margin.
    """
    if not setting('DAO_TLE_ENABLED'):
        raise ConfigurationError("TLE is disabled (DAO_TLE_ENABLED = False)")
    graph.check_k(k, minimum=2)
    if dataset.n != graph.n:
        raise EstimationError(f"graph has {graph.n} points, dataset has {dataset.n}")
    epsilon = float(setting('DAO_TLE_EPSILON'))
    indices, distances = graph.neighborhood(k)
    points = dataset.points

    def block(rows):
        return [_tle_point(points[indices[i]], distances[i], epsilon) for i in rows]

    workers = thread_count(threads)
    chunk = max(1, -(-graph.n // (workers * 4)))
    blocks = [range(s, min(s + chunk, graph.n)) for s in range(0, graph.n, chunk)]
    raw = np.empty(graph.n)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for rows, values in zip(blocks, pool.map(block, blocks)):
            raw[rows.start:rows.stop] = values
    return _clamped(LidEstimator.TLE, k, raw, graph.dim)


def estimate(graph: NeighborGraph, estimator: str, k: int,
             dataset: Dataset | None = None) -> LidProfile:
    if estimator == LidEstimator.MLE:
        return estimate_mle(graph, k)
    if estimator == LidEstimator.TWONN:
        return estimate_twonn(graph)
    if estimator == LidEstimator.TLE:
        if dataset is None:
            raise EstimationError("TLE needs the dataset coordinates")
        return estimate_tle(graph, dataset, k)
    raise EstimationError(f"unknown LID estimator {estimator!r}")


def estimator_grid(estimator: str, kmax: int) -> list[int]:
    """Neighborhood sizes to sweep for ``estimator`` on a graph of capacity kmax."""
    if estimator == LidEstimator.TWONN:
        return [2]
    return [k for k in estimator_k_grid() if 2 <= k <= kmax]


def write_profile_csv(profile: LidProfile, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame({
        'point': np.arange(len(profile)),
        'id': profile.ids,
        'log_id': profile.log_ids,
    }).to_csv(path, index=False, float_format='%.17g', lineterminator='\n')
    return path
