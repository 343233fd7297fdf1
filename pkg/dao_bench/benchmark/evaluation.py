"""
Metrics and statistics for the benchmark: ROC AUC, log-LID dispersion,
Moran's I, simple linear regression and Friedman/Nemenyi ranks.
"""
import logging
import math
from dataclasses import asdict, dataclass, fields

import numpy as np
import pandas as pd
from django.db import models
from django.utils.translation import gettext_lazy as _
from scipy.sparse import csr_matrix
from scipy.special import betainc
from scipy.stats import chi2, rankdata, studentized_range

from outliers.conf import setting
from outliers.detectors import ScoreVector
from outliers.lid import LidProfile
from outliers.neighbors import NeighborGraph

from .exceptions import EvaluationError, IncompleteGridError

logger = logging.getLogger(__name__)


class MoransWeights(models.TextChoices):
    KNN = 'knn', _('row-normalized kNN')
    SYMMETRIC = 'symmetric', _('row-normalized symmetrized kNN')


# Demšar's table of q_alpha (studentized range / sqrt(2), infinite df).
NEMENYI_Q = {
    0.05: {2: 1.960, 3: 2.343, 4: 2.569, 5: 2.728, 6: 2.850, 7: 2.949, 8: 3.031, 9: 3.102, 10: 3.164},
    0.10: {2: 1.645, 3: 2.052, 4: 2.291, 5: 2.459, 6: 2.589, 7: 2.693, 8: 2.780, 9: 2.855, 10: 2.920},
}


@dataclass(frozen=True)
class EvalRecord:
    dataset: str
    detector: str
    lid_estimator: str | None
    best_k: int
    roc_auc: float
    lid_k: int | None = None
    dispersion_R: float | None = None
    morans_I: float | None = None
    morans_k: int | None = None
    runtime_mean: float | None = None
    runtime_std: float | None = None
    dim_c1: int | None = None
    dim_c2: int | None = None

    @property
    def method(self) -> str:
        if self.lid_estimator:
            return f"{self.detector}_{self.lid_estimator}"
        return self.detector

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]


def records_frame(records) -> pd.DataFrame:
    return pd.DataFrame([asdict(record) for record in records], columns=EvalRecord.columns())


def write_records_csv(records, path):
    records_frame(records).to_csv(path, index=False, float_format='%.17g', lineterminator='\n')
    return path


def read_records_csv(path) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path)
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        raise EvaluationError(f"unreadable records file {path}: {e}") from None
    missing = set(EvalRecord.columns()) - set(frame.columns)
    if missing:
        raise EvaluationError(f"{path} is not an EvalRecord table, missing columns {sorted(missing)}")
    frame['lid_estimator'] = frame['lid_estimator'].astype(object).where(frame['lid_estimator'].notna(), None)
    frame['method'] = [
        f"{detector}_{estimator}" if estimator else detector
        for detector, estimator in zip(frame['detector'], frame['lid_estimator'])
    ]
    return frame


@dataclass(frozen=True)
class RegressionResult:
    slope: float
    intercept: float
    p_value: float
    pearson_rho: float
    n: int


def roc_auc(scores, labels) -> float:
    """Mann-Whitney U over (#outliers * #inliers); tied scores count 1/2."""
    if isinstance(scores, ScoreVector):
        scores = scores.scores
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise EvaluationError(f"{scores.size} scores for {labels.size} labels")
    positive = labels == 1
    n_pos = int(positive.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise EvaluationError("ROC AUC needs both outliers and inliers")
    ranks = rankdata(scores, method='average')
    u = ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def dispersion_R(lids) -> float:
    """Mean absolute pairwise difference of log-LID values.

    O(n log n): for sorted values x, sum_{i<j} (x_j - x_i) = sum_j x_j (2j - n + 1).
    """
    log_ids = lids.log_ids if isinstance(lids, LidProfile) else np.log(np.asarray(lids, dtype=float))
    n = len(log_ids)
    if n < 2:
        raise EvaluationError("dispersion needs at least two estimates")
    ordered = np.sort(log_ids)
    weights = 2 * np.arange(n) - n + 1
    return float(2.0 * (ordered * weights).sum() / (n * (n - 1)))


def morans_I(values, graph: NeighborGraph, k: int, weights: str | None = None) -> float:
    """Global Moran's I over the k-nearest-neighbor graph.

    ``knn`` weights are w_ij = 1/k on NN_k(i). ``symmetric`` links i and j when
    either is among the other's k nearest neighbors, then row-normalizes.
    Both leave every row summing to one, so the total weight is n.
    """
    weights = setting('DAO_MORANS_WEIGHTS') if weights is None else weights
    values = np.asarray(values, dtype=np.float64)
    indices = graph.neighborhood(k)[0]
    if len(values) != graph.n:
        raise EvaluationError(f"{len(values)} values for a graph of {graph.n} points")
    centered = values - values.mean()
    denominator = (centered * centered).sum()
    if np.ptp(values) == 0 or denominator == 0:
        raise EvaluationError("Moran's I undefined: values have zero variance")
    n = len(values)
    if weights == MoransWeights.KNN:
        lagged = centered[indices].mean(axis=1)
    elif weights == MoransWeights.SYMMETRIC:
        rows = np.repeat(np.arange(n), indices.shape[1])
        adjacency = csr_matrix((np.ones(rows.size), (rows, indices.ravel())), shape=(n, n))
        adjacency = adjacency.maximum(adjacency.T)
        lagged = (adjacency @ centered) / np.asarray(adjacency.sum(axis=1)).ravel()
    else:
        raise EvaluationError(f"unknown Moran's I weights {weights!r}, expected one of {MoransWeights.values}")
    return float((centered * lagged).sum() / denominator)


def morans_I_maxmag(values, graph: NeighborGraph, k_range=None) -> tuple[float, int]:
    """Moran's I at the k of largest magnitude (either sign); ties go to the smallest k."""
    if k_range is None:
        low, high = setting('DAO_MORANS_K_RANGE')
        k_range = range(low, high + 1)
    best = None
    for k in sorted(k_range):
        value = morans_I(values, graph, k)
        if best is None or abs(value) > abs(best[0]):
            best = (value, int(k))
    if best is None:
        raise EvaluationError("empty k range for Moran's I")
    return best


def t_two_sided_p(t: float, df: int) -> float:
    """Two-sided p-value of Student's t via the regularized incomplete beta."""
    if math.isinf(t):
        return 0.0
    return float(betainc(df / 2.0, 0.5, df / (df + t * t)))


def ols_regression(x, y) -> RegressionResult:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = len(x)
    if n != len(y):
        raise EvaluationError(f"x has {n} values, y has {len(y)}")
    if n < 3:
        raise EvaluationError(f"regression needs at least 3 points, got {n}")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = (dx * dx).sum()
    if sxx == 0:
        raise EvaluationError("regression undefined: x has zero variance")
    syy = (dy * dy).sum()
    sxy = (dx * dy).sum()
    slope = sxy / sxx
    intercept = y.mean() - slope * x.mean()
    if syy == 0:
        return RegressionResult(float(slope), float(intercept), 1.0, 0.0, n)
    rho = float(np.clip(sxy / math.sqrt(sxx * syy), -1.0, 1.0))
    df = n - 2
    t = math.inf if abs(rho) == 1.0 else rho * math.sqrt(df / (1.0 - rho * rho))
    return RegressionResult(float(slope), float(intercept), t_two_sided_p(t, df), rho, n)


def nemenyi_q(alpha: float, methods: int) -> float:
    table = NEMENYI_Q.get(alpha, {})
    if methods in table:
        return table[methods]
    try:
        q = studentized_range.ppf(1.0 - alpha, methods, 1e6) / math.sqrt(2.0)
    except (ValueError, OverflowError) as e:
        raise EvaluationError(f"no studentized range quantile for alpha={alpha}: {e}") from None
    if not np.isfinite(q):
        raise EvaluationError(f"no studentized range quantile for alpha={alpha}, M={methods}")
    return float(q)


@dataclass(frozen=True)
class RankSummary:
    average_ranks: pd.Series
    critical_distance: float
    alpha: float
    datasets: int
    friedman_statistic: float
    friedman_p_value: float


def friedman_nemenyi(auc_table: pd.DataFrame, alpha: float | None = None) -> RankSummary:
    """Average ranks (1 = best AUC, ties averaged) and the Nemenyi critical distance."""
    alpha = setting('DAO_NEMENYI_ALPHA') if alpha is None else alpha
    if auc_table.isna().any().any():
        missing = [
            (dataset, method)
            for dataset, row in auc_table.iterrows() for method, value in row.items() if pd.isna(value)
        ]
        raise IncompleteGridError('ranks', missing)
    n_datasets, n_methods = auc_table.shape
    if n_methods < 2:
        raise EvaluationError("ranks: at least 2 methods required")
    if n_datasets < 2:
        raise EvaluationError("ranks: at least 2 datasets required")
    ranks = np.vstack([rankdata(-row, method='average') for row in auc_table.to_numpy(dtype=float)])
    average = pd.Series(ranks.mean(axis=0), index=auc_table.columns, name='avg_rank')
    cd = nemenyi_q(alpha, n_methods) * math.sqrt(n_methods * (n_methods + 1) / (6.0 * n_datasets))
    statistic = 12.0 * n_datasets / (n_methods * (n_methods + 1)) * (
        (average ** 2).sum() - n_methods * (n_methods + 1) ** 2 / 4.0)
    return RankSummary(
        average_ranks=average,
        critical_distance=float(cd),
        alpha=float(alpha),
        datasets=n_datasets,
        friedman_statistic=float(statistic),
        friedman_p_value=float(chi2.sf(statistic, n_methods - 1)),
    )
