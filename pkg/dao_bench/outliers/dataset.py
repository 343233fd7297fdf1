import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

import numpy as np
import pandas as pd
from django.db import models
from django.utils.translation import gettext_lazy as _

from .conf import setting
from .exceptions import DatasetError

logger = logging.getLogger(__name__)

LABEL_COLUMN = 'label'


class Metric(models.TextChoices):
    EUCLIDEAN = 'euclidean', _('Euclidean')


def distances_to(candidates: np.ndarray, query: np.ndarray,
                 metric: str = Metric.EUCLIDEAN) -> np.ndarray:
    """Distances from ``query`` to every row of ``candidates``.

    This is the only distance kernel in the package: the brute force and the
    KD-tree search both call it, so equal inputs give bit-equal distances.
    """
    if metric != Metric.EUCLIDEAN:
        raise DatasetError(f"unsupported metric {metric!r}")
    diff = candidates - query
    return np.sqrt((diff * diff).sum(axis=1))


@dataclass(frozen=True, eq=False)
class Dataset:
    points: np.ndarray
    labels: np.ndarray | None = None
    name: str = 'dataset'
    seed: int | None = None
    metadata: dict[str, Any] = field(default_factory=dict)
    duplicates_dropped: int = 0

    def __post_init__(self):
        points = np.array(self.points, dtype=np.float64)
        if points.ndim == 1:
            points = points.reshape(-1, 1)
        if points.ndim != 2 or points.shape[1] < 1:
            raise DatasetError(f"points must be an n x d matrix, got shape {points.shape}")
        if points.shape[0] < 2:
            raise DatasetError(f"dataset {self.name!r} needs at least 2 points, got {points.shape[0]}")
        bad = np.argwhere(~np.isfinite(points))
        if len(bad):
            row, column = bad[0]
            raise DatasetError(f"non-finite value at row {row}, column {column}")
        # -0.0 and 0.0 must compare equal bitwise for duplicate detection
        points = points + 0.0
        if len(_first_occurrences(points)) != len(points):
            raise DatasetError(f"dataset {self.name!r} contains duplicate points")
        points.setflags(write=False)
        object.__setattr__(self, 'points', points)

        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (len(points),):
                raise DatasetError(
                    f"label vector has length {labels.size}, expected {len(points)}")
            if not np.isin(labels, (0, 1)).all():
                raise DatasetError("labels must be 0 (inlier) or 1 (outlier)")
            labels = labels.astype(np.int8)
            if not (labels == 0).any():
                raise DatasetError(f"dataset {self.name!r} has no inliers")
            labels.setflags(write=False)
            object.__setattr__(self, 'labels', labels)

    def __str__(self):
        return f"{self.name} ({self.n} x {self.d})"

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def has_labels(self) -> bool:
        return self.labels is not None

    @property
    def outlier_count(self) -> int:
        return 0 if self.labels is None else int(self.labels.sum())

    def fingerprint(self) -> str:
        """SHA-256 of the coordinates and labels; used as the graph cache key."""
        digest = hashlib.sha256()
        digest.update(np.array(self.points.shape, dtype='<u8').tobytes())
        digest.update(np.ascontiguousarray(self.points, dtype='<f8').tobytes())
        if self.labels is not None:
            digest.update(self.labels.astype('<u1').tobytes())
        return digest.hexdigest()

    @classmethod
    def from_points(cls, points, labels=None, **kwargs) -> 'Dataset':
        """Build a dataset, dropping exact duplicate rows (first occurrence wins)."""
        points = np.array(points, dtype=np.float64)
        if points.ndim == 1:
            points = points.reshape(-1, 1)
        points = points + 0.0
        keep = _first_occurrences(points)
        dropped = len(points) - len(keep)
        if labels is not None:
            labels = np.asarray(labels)[keep]
        if len(keep) < 2:
            raise DatasetError(
                f"only {len(keep)} distinct point(s) left after dropping {dropped} duplicates")
        return cls(points[keep], labels, duplicates_dropped=dropped, **kwargs)


def _first_occurrences(points: np.ndarray) -> np.ndarray:
    """Sorted row indices of the first occurrence of every distinct row."""
    rows = np.ascontiguousarray(points).view(np.dtype((np.void, points.dtype.itemsize * points.shape[1])))
    _, first = np.unique(rows.ravel(), return_index=True)
    return np.sort(first)


def _parse_float(cell: str, row: int, column: int) -> float:
    try:
        value = float(cell)
    except (TypeError, ValueError):
        raise DatasetError(f"non-numeric value {cell!r} at row {row}, column {column}") from None
    if not np.isfinite(value):
        raise DatasetError(f"non-finite value at row {row}, column {column}")
    return value


def _looks_like_header(cells: Iterable[str]) -> bool:
    for cell in cells:
        try:
            float(cell)
        except (TypeError, ValueError):
            return True
    return False


def _parse_labels(values: Iterable[str], outlier_tokens, inlier_tokens) -> np.ndarray:
    outlier_tokens = {str(token).strip() for token in outlier_tokens}
    inlier_tokens = {str(token).strip() for token in inlier_tokens}
    labels = []
    for row, token in enumerate(values):
        token = str(token).strip()
        if token in outlier_tokens:
            labels.append(1)
        elif token in inlier_tokens:
            labels.append(0)
        else:
            raise DatasetError(f"unknown label token {token!r} at row {row}")
    return np.array(labels, dtype=np.int8)


def load_csv(path, label_column: str | int | None = None,
             outlier_tokens: Iterable[str] | None = None,
             inlier_tokens: Iterable[str] | None = None) -> Dataset:
    """Read a comma-separated file into a Dataset.

    The header row is optional and detected by the presence of a non-numeric
    cell. ``label_column`` is a header name or a zero-based column position.
    When a JSON sidecar with the same stem exists, name, seed and generator
    metadata are taken from it and its ``label_column`` is used by default.
    Exact duplicate rows are dropped; the first occurrence (and its label) wins.
    """
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"file not found: {path}")

    sidecar = read_sidecar(path)
    if label_column is None:
        label_column = sidecar.get('label_column')
    tokens = setting('DAO_LABEL_TOKENS')
    outlier_tokens = tokens['outlier'] if outlier_tokens is None else outlier_tokens
    inlier_tokens = tokens['inlier'] if inlier_tokens is None else inlier_tokens

    try:
        frame = pd.read_csv(path, header=None, dtype=str, sep=',', skip_blank_lines=True,
                            keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise DatasetError(f"file is empty: {path}") from None
    except pd.errors.ParserError as e:
        raise DatasetError(f"malformed CSV {path}: {e}") from None

    header = None
    first = frame.iloc[0] if len(frame) else []
    if isinstance(label_column, int):
        first = [cell for j, cell in enumerate(first) if j != label_column]
    if len(frame) and _looks_like_header(first):
        header = [str(cell).strip() for cell in frame.iloc[0]]
        frame = frame.iloc[1:].reset_index(drop=True)

    label_position = None
    if label_column is not None:
        if isinstance(label_column, int) or str(label_column).isdigit():
            label_position = int(label_column)
            if label_position >= frame.shape[1]:
                raise DatasetError(f"label column {label_column} is absent from {path}")
        elif header is not None and label_column in header:
            label_position = header.index(label_column)
        else:
            raise DatasetError(f"label column {label_column!r} is absent from {path}")

    feature_positions = [j for j in range(frame.shape[1]) if j != label_position]
    if not feature_positions:
        raise DatasetError(f"no feature columns in {path}")
    values = frame.to_numpy()
    points = np.empty((len(values), len(feature_positions)), dtype=np.float64)
    for i, row in enumerate(values):
        for out, j in enumerate(feature_positions):
            points[i, out] = _parse_float(row[j], i, j)

    labels = None
    if label_position is not None:
        labels = _parse_labels(values[:, label_position], outlier_tokens, inlier_tokens)

    dataset = Dataset.from_points(
        points, labels,
        name=sidecar.get('name', path.stem),
        seed=sidecar.get('seed'),
        metadata=sidecar.get('metadata', {}),
    )
    logger.info(f"Loaded {dataset} from {path}, dropped {dataset.duplicates_dropped} duplicates")
    return dataset


def sidecar_path(path) -> Path:
    return Path(path).with_suffix('.json')


def read_sidecar(path) -> dict[str, Any]:
    sidecar = sidecar_path(path)
    if not sidecar.is_file():
        return {}
    try:
        return json.loads(sidecar.read_text())
    except json.JSONDecodeError as e:
        raise DatasetError(f"unreadable sidecar {sidecar}: {e}") from None


def write_csv(dataset: Dataset, path) -> Path:
    """Write coordinates (plus a trailing ``label`` column) and a JSON sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(dataset.points, columns=[f"x{j}" for j in range(dataset.d)])
    if dataset.has_labels:
        frame[LABEL_COLUMN] = dataset.labels.astype(int)
    frame.to_csv(path, index=False, float_format='%.17g', lineterminator='\n')
    sidecar = {
        'name': dataset.name,
        'seed': dataset.seed,
        'label_column': LABEL_COLUMN if dataset.has_labels else None,
        'metadata': dataset.metadata,
    }
    sidecar_path(path).write_text(json.dumps(sidecar, indent=2, sort_keys=True) + '\n')
    return path


def feature_distinctness(dataset: Dataset) -> np.ndarray:
    """Per-column share of distinct values (distinct count / n)."""
    return np.array([
        len(np.unique(dataset.points[:, j])) / dataset.n for j in range(dataset.d)
    ])


def warn_if_indistinct(dataset: Dataset, threshold: float | None = None) -> bool:
    """Log a warning when no column reaches ``threshold`` distinct values."""
    if threshold is None:
        threshold = setting('DAO_DISTINCT_WARNING_FRACTION')
    best = feature_distinctness(dataset).max()
    if best < threshold:
        logger.warning(
            f"{dataset.name}: no attribute spans {threshold:.0%} distinct values "
            f"(best {best:.1%}); density-based scores may be unreliable")
        return True
    return False
