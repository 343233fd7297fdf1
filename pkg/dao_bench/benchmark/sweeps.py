"""
Best-k parameter sweeps and per-run timing for one dataset and one detector.
"""
import logging
import time
from dataclasses import dataclass

import numpy as np

from outliers.dataset import Dataset
from outliers.detectors import Detector, ScoreVector, score
from outliers.lid import LidEstimator, LidProfile, estimate, estimator_grid
from outliers.neighbors import NeighborGraph, build_neighbor_graph

from .evaluation import EvalRecord, roc_auc
from .exceptions import EvaluationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LidConfig:
    estimator: str = LidEstimator.MLE
    # None sweeps the DAO_LID_K_GRID setting
    k_grid: tuple[int, ...] | None = None

    def ks(self, graph: NeighborGraph) -> list[int]:
        if self.estimator == LidEstimator.TWONN:
            return [2]
        if self.k_grid is None:
            return estimator_grid(self.estimator, graph.kmax)
        return sorted(k for k in set(self.k_grid) if 2 <= k <= graph.kmax)


@dataclass(frozen=True, eq=False)
class SweepOutcome:
    record: EvalRecord
    scores: ScoreVector
    lids: LidProfile | None


def check_k_range(k_range, n: int) -> list[int]:
    ks = sorted({int(k) for k in k_range})
    if not ks:
        raise EvaluationError("empty k range")
    bad = [k for k in ks if not 1 <= k <= n - 1]
    if bad:
        raise EvaluationError(f"k={bad[0]} outside [1, {n - 1}]")
    return ks


def required_kmax(k_range, lid_config: LidConfig | None, n: int) -> int:
    kmax = max(k_range)
    if lid_config is not None:
        grid = lid_config.k_grid or estimator_grid(lid_config.estimator, n - 1)
        kmax = max(kmax, max(grid, default=2))
    return min(kmax, n - 1)


def sweep(dataset: Dataset, detector: str, k_range, lid_config: LidConfig | None = None,
          graph: NeighborGraph | None = None) -> SweepOutcome:
    if not dataset.has_labels:
        raise EvaluationError(f"{dataset.name} is unlabeled, nothing to evaluate")
    ks = check_k_range(k_range, dataset.n)
    if detector == Detector.DAO and lid_config is None:
        lid_config = LidConfig()
    if graph is None:
        graph = build_neighbor_graph(dataset, required_kmax(ks, lid_config, dataset.n))
    if ks[-1] > graph.kmax:
        raise EvaluationError(f"k={ks[-1]} exceeds graph capacity {graph.kmax}")

    # candidates are (auc, -k, -lid_k) so max() picks the best AUC, then smallest k
    best = None
    if detector == Detector.DAO:
        lid_ks = lid_config.ks(graph)
        if not lid_ks:
            raise EvaluationError(f"no LID neighborhood size fits kmax={graph.kmax}")
        for lid_k in lid_ks:
            lids = estimate(graph, lid_config.estimator, lid_k, dataset)
            for k in ks:
                scores = score(graph, detector, k, lids)
                key = (roc_auc(scores, dataset.labels), -k, -lids.k_used)
                if best is None or key > best[0]:
                    best = (key, scores, lids)
    else:
        for k in ks:
            scores = score(graph, detector, k)
            key = (roc_auc(scores, dataset.labels), -k, 0)
            if best is None or key > best[0]:
                best = (key, scores, None)

    (auc, neg_k, _), scores, lids = best
    record = EvalRecord(
        dataset=dataset.name,
        detector=str(detector),
        lid_estimator=str(lids.estimator) if lids is not None else None,
        best_k=-neg_k,
        roc_auc=auc,
        lid_k=lids.k_used if lids is not None else None,
        dim_c1=dataset.metadata.get('dim_c1'),
        dim_c2=dataset.metadata.get('dim_c2'),
    )
    logger.debug(f"{dataset.name} {record.method}: AUC {auc:.4f} at k={record.best_k}")
    return SweepOutcome(record, scores, lids)


def best_k_sweep(dataset: Dataset, detector: str, k_range, lid_config: LidConfig | None = None,
                 graph: NeighborGraph | None = None) -> EvalRecord:
    """Evaluate every k (and every LID k for DAO); keep the highest ROC AUC.

    Ties on AUC go to the smallest k, then the smallest LID k.
    """
    return sweep(dataset, detector, k_range, lid_config, graph).record


def time_detector(dataset: Dataset, detector: str, k_range, lid_config: LidConfig | None = None,
                  graph: NeighborGraph | None = None, repeats: int = 1) -> tuple[float, float]:
    """Mean and standard deviation of wall-clock seconds per run.

    A run scores one k (for DAO: one k and one LID k, LID estimation included)
    and evaluates the ROC AUC when labels exist. Graph construction is shared
    by all detectors and excluded.
    """
    ks = check_k_range(k_range, dataset.n)
    if detector == Detector.DAO and lid_config is None:
        lid_config = LidConfig()
    if graph is None:
        graph = build_neighbor_graph(dataset, required_kmax(ks, lid_config, dataset.n))
    graph.log_distance_prefix  # part of graph preparation, not of a run

    lid_ks = lid_config.ks(graph) if detector == Detector.DAO else [None]
    timings = []
    for _ in range(max(1, repeats)):
        for k in ks:
            for lid_k in lid_ks:
                started = time.perf_counter()
                lids = estimate(graph, lid_config.estimator, lid_k, dataset) if lid_k else None
                scores = score(graph, detector, k, lids)
                if dataset.has_labels:
                    roc_auc(scores, dataset.labels)
                timings.append(time.perf_counter() - started)
    timings = np.array(timings)
    return float(timings.mean()), float(timings.std())
