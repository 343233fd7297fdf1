"""
Outlier scores computed from a shared NeighborGraph. Higher means more outlying.

    kNN   kdist(q)
    LOF   mean over o in NN_k(q) of lrd(o) / lrd(q)
    SLOF  mean over o in NN_k(q) of kdist(q) / kdist(o)
    DAO   mean over o in NN_k(q) of (kdist(q) / kdist(o)) ** LID(o)
"""
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from django.db import models
from django.utils.translation import gettext_lazy as _

from .exceptions import DetectorError
from .lid import LidProfile
from .neighbors import NeighborGraph

logger = logging.getLogger(__name__)


class Detector(models.TextChoices):
    KNN = 'kNN', _('k-NN distance')
    LOF = 'LOF', _('local outlier factor')
    SLOF = 'SLOF', _('simplified local outlier factor')
    DAO = 'DAO', _('dimensionality-aware outlierness')


@dataclass(frozen=True, eq=False)
class ScoreVector:
    detector: str
    k: int
    scores: np.ndarray
    lid_estimator: str | None = None

    def __post_init__(self):
        if not np.isfinite(self.scores).all():
            raise DetectorError(f"{self.label} produced non-finite scores at k={self.k}")
        self.scores.setflags(write=False)

    def __str__(self):
        return f"{self.label}@k={self.k}"

    def __len__(self):
        return len(self.scores)

    @property
    def label(self) -> str:
        if self.lid_estimator:
            return f"{self.detector}_{self.lid_estimator}"
        return str(self.detector)


def score_knn(graph: NeighborGraph, k: int) -> ScoreVector:
    return ScoreVector(Detector.KNN, k, graph.kdist(k).copy())


def score_slof(graph: NeighborGraph, k: int) -> ScoreVector:
    indices = graph.neighborhood(k)[0]
    kd = graph.distances[:, k - 1]
    scores = (kd[:, None] / kd[indices]).mean(axis=1)
    return ScoreVector(Detector.SLOF, k, scores)


def local_reachability_density(graph: NeighborGraph, k: int) -> np.ndarray:
    """lrd_k(p) = k / sum over s in NN_k(p) of max(kdist(s), d(p, s))."""
    indices, distances = graph.neighborhood(k)
    kd = graph.distances[:, k - 1]
    reach = np.maximum(kd[indices], distances)
    return k / reach.sum(axis=1)


def score_lof(graph: NeighborGraph, k: int) -> ScoreVector:
    indices = graph.neighborhood(k)[0]
    lrd = local_reachability_density(graph, k)
    scores = lrd[indices].mean(axis=1) / lrd
    return ScoreVector(Detector.LOF, k, scores)


def score_dao(graph: NeighborGraph, k: int, lids: LidProfile) -> ScoreVector:
    """Dimensionality-aware outlierness: the exponent is the NEIGHBOR's LID."""
    indices = graph.neighborhood(k)[0]
    if len(lids) != graph.n:
        raise DetectorError(f"LID profile has {len(lids)} values, graph has {graph.n} points")
    if not (np.isfinite(lids.ids).all() and (lids.ids > 0).all()):
        raise DetectorError("LID estimates must be finite and positive")
    log_kd = np.log(graph.distances[:, k - 1])
    # (kdist(q) / kdist(o)) ** id(o) as exp(id(o) * ln ratio)
    exponent = lids.ids[indices] * (log_kd[:, None] - log_kd[indices])
    scores = np.exp(exponent).mean(axis=1)
    return ScoreVector(Detector.DAO, k, scores, lid_estimator=lids.estimator)


def score(graph: NeighborGraph, detector: str, k: int,
          lids: LidProfile | None = None) -> ScoreVector:
    if detector == Detector.KNN:
        return score_knn(graph, k)
    if detector == Detector.SLOF:
        return score_slof(graph, k)
    if detector == Detector.LOF:
        return score_lof(graph, k)
    if detector == Detector.DAO:
        if lids is None:
            raise DetectorError("DAO needs a LID profile")
        return score_dao(graph, k, lids)
    raise DetectorError(f"unknown detector {detector!r}")


def write_scores_csv(scores: ScoreVector, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame({
        'point': np.arange(len(scores)),
        'score': scores.scores,
    }).to_csv(path, index=False, float_format='%.17g', lineterminator='\n')
    return path
