"""
Exact k-nearest-neighbor graphs.

A NeighborGraph holds, for every point, its kmax nearest neighbors (the point
itself excluded) sorted by distance, ties broken by ascending point index.
One graph built at the largest k needed serves every smaller k.
"""
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property, partial
from pathlib import Path

import numpy as np
from django.db import models
from django.utils.translation import gettext_lazy as _

from .conf import setting, thread_count
from .dataset import Dataset, Metric, distances_to
from .exceptions import NeighborError

logger = logging.getLogger(__name__)

TIE_RULE = 'distance, then ascending index'

# Rounding slack when pruning a KD-tree branch by its splitting plane.
PLANE_SLACK = 1e-12


class KnnMethod(models.TextChoices):
    BRUTE = 'brute', _('brute force')
    KDTREE = 'kdtree', _('KD-tree')


@dataclass(frozen=True, eq=False)
class NeighborGraph:
    indices: np.ndarray
    distances: np.ndarray
    dim: int
    metric: str = Metric.EUCLIDEAN
    tie_rule: str = TIE_RULE

    def __post_init__(self):
        if self.indices.shape != self.distances.shape or self.indices.ndim != 2:
            raise NeighborError(
                f"indices {self.indices.shape} and distances {self.distances.shape} disagree")
        self.indices.setflags(write=False)
        self.distances.setflags(write=False)

    def __str__(self):
        return f"NeighborGraph(n={self.n}, kmax={self.kmax}, {self.metric})"

    @property
    def n(self) -> int:
        return self.indices.shape[0]

    @property
    def kmax(self) -> int:
        return self.indices.shape[1]

    def check_k(self, k: int, minimum: int = 1) -> int:
        if not minimum <= k <= self.kmax:
            raise NeighborError(f"k={k} out of range [{minimum}, {self.kmax}]")
        return int(k)

    def kdist(self, k: int) -> np.ndarray:
        """k-NN distance of every point."""
        self.check_k(k)
        return self.distances[:, k - 1]

    def neighborhood(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Indices and distances of the first k neighbors of every point."""
        self.check_k(k)
        return self.indices[:, :k], self.distances[:, :k]

    @cached_property
    def log_distance_prefix(self) -> np.ndarray:
        """Row-wise cumulative sums of log distances, shared by LID estimators.

        Column j holds the sum of the logs of the first j+1 neighbor distances.
        """
        prefix = np.cumsum(np.log(self.distances), axis=1)
        prefix.setflags(write=False)
        return prefix

    def equals(self, other: 'NeighborGraph') -> bool:
        return (np.array_equal(self.indices, other.indices)
                and np.array_equal(self.distances, other.distances))


def kdist(graph: NeighborGraph, i: int, k: int) -> float:
    """Distance from point ``i`` to its k-th nearest neighbor."""
    graph.check_k(k)
    if not 0 <= i < graph.n:
        raise NeighborError(f"point index {i} out of range [0, {graph.n - 1}]")
    return float(graph.distances[i, k - 1])


def _select(distances: np.ndarray, candidates: np.ndarray, kmax: int) -> tuple[np.ndarray, np.ndarray]:
    """The kmax smallest (distance, index) pairs in lexicographic order."""
    if len(distances) > kmax:
        threshold = np.partition(distances, kmax - 1)[kmax - 1]
        within = distances <= threshold
        distances, candidates = distances[within], candidates[within]
    order = np.lexsort((candidates, distances))[:kmax]
    return candidates[order], distances[order]


def _brute_rows(points: np.ndarray, rows: range, kmax: int, metric: str):
    everyone = np.arange(len(points))
    indices = np.empty((len(rows), kmax), dtype=np.intp)
    distances = np.empty((len(rows), kmax), dtype=np.float64)
    for out, i in enumerate(rows):
        dist = distances_to(points, points[i], metric)
        dist[i] = np.inf
        indices[out], distances[out] = _select(dist, everyone, kmax)
    return indices, distances


class KDTree:
    """KD-tree with median splits on the dimension of widest spread.

    Leaves are index buckets of at most ``leaf_size`` points; queries scan
    buckets with the shared distance kernel so results match brute force
    bit for bit.
    """

    def __init__(self, points: np.ndarray, leaf_size: int = 16, metric: str = Metric.EUCLIDEAN):
        self.points = points
        self.leaf_size = max(1, int(leaf_size))
        self.metric = metric
        # node arrays: split axis (-1 for leaves), split value, children, bucket
        self.axis = []
        self.split = []
        self.children = []
        self.buckets = []
        self.root = self._construct(np.arange(len(points)))

    def _new_node(self, axis, split, children, bucket):
        self.axis.append(axis)
        self.split.append(split)
        self.children.append(children)
        self.buckets.append(bucket)
        return len(self.axis) - 1

    def _construct(self, indices: np.ndarray) -> int:
        if len(indices) <= self.leaf_size:
            return self._new_node(-1, 0.0, None, indices)
        block = self.points[indices]
        spread = block.max(axis=0) - block.min(axis=0)
        axis = int(np.argmax(spread))
        if spread[axis] == 0:
            return self._new_node(-1, 0.0, None, indices)
        middle = len(indices) // 2
        order = np.argsort(block[:, axis], kind='stable')
        split = float(block[order[middle], axis])
        left, right = indices[order[:middle]], indices[order[middle:]]
        node = self._new_node(axis, split, None, None)
        self.children[node] = (self._construct(left), self._construct(right))
        return node

    def query(self, i: int, kmax: int) -> tuple[np.ndarray, np.ndarray]:
        """kmax nearest neighbors of point ``i``, excluding ``i`` itself."""
        query = self.points[i]
        best_idx = np.empty(0, dtype=np.intp)
        best_dist = np.empty(0, dtype=np.float64)
        stack = [(self.root, 0.0)]
        while stack:
            node, gap = stack.pop()
            if len(best_dist) == kmax and gap > best_dist[-1] * (1 + PLANE_SLACK) + PLANE_SLACK:
                continue
            axis = self.axis[node]
            if axis < 0:
                bucket = self.buckets[node]
                bucket = bucket[bucket != i]
                if not len(bucket):
                    continue
                dist = distances_to(self.points[bucket], query, self.metric)
                best_idx, best_dist = _select(
                    np.concatenate((best_dist, dist)), np.concatenate((best_idx, bucket)), kmax)
                continue
            offset = query[axis] - self.split[node]
            near, far = self.children[node] if offset < 0 else self.children[node][::-1]
            # far side first on the stack so the near side is searched first
            stack.append((far, max(gap, abs(offset))))
            stack.append((near, gap))
        return best_idx, best_dist


def _kdtree_rows(tree: KDTree, rows: range, kmax: int):
    indices = np.empty((len(rows), kmax), dtype=np.intp)
    distances = np.empty((len(rows), kmax), dtype=np.float64)
    for out, i in enumerate(rows):
        indices[out], distances[out] = tree.query(i, kmax)
    return indices, distances


def build_neighbor_graph(dataset: Dataset, kmax: int, method: str | None = None,
                         threads: int | None = None,
                         metric: str = Metric.EUCLIDEAN) -> NeighborGraph:
    """Exact kNN graph of every point for neighborhoods up to ``kmax``."""
    method = method or setting('DAO_KNN_METHOD')
    if method not in KnnMethod.values:
        raise NeighborError(f"unknown neighbor search method {method!r}")
    if not 1 <= kmax <= dataset.n - 1:
        raise NeighborError(f"kmax={kmax} out of range [1, {dataset.n - 1}]")

    workers = thread_count(threads)
    started = time.perf_counter()
    points = dataset.points
    if method == KnnMethod.KDTREE:
        tree = KDTree(points, setting('DAO_KDTREE_LEAF_SIZE'), metric)
        task = partial(_kdtree_rows, tree, kmax=kmax)
    else:
        task = partial(_brute_rows, points, kmax=kmax, metric=metric)

    chunk = max(1, -(-dataset.n // (workers * 4)))
    blocks = [range(start, min(start + chunk, dataset.n)) for start in range(0, dataset.n, chunk)]
    indices = np.empty((dataset.n, kmax), dtype=np.intp)
    distances = np.empty((dataset.n, kmax), dtype=np.float64)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for rows, (block_idx, block_dist) in zip(blocks, pool.map(task, blocks)):
            indices[rows.start:rows.stop] = block_idx
            distances[rows.start:rows.stop] = block_dist

    if not (distances > 0).all():
        raise NeighborError(f"{dataset.name}: zero neighbor distance, duplicates were not dropped")
    logger.info(f"Built {method} graph for {dataset} with kmax={kmax} "
                f"in {time.perf_counter() - started:.2f}s")
    return NeighborGraph(indices, distances, dim=dataset.d, metric=metric)


# Binary cache: little-endian header {n, kmax} as uint32, then the index block
# (uint32, row-major) and the distance block (float64, row-major).
HEADER_DTYPE = np.dtype('<u4')
INDEX_DTYPE = np.dtype('<u4')
DISTANCE_DTYPE = np.dtype('<f8')


def save_graph(graph: NeighborGraph, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'wb') as handle:
        handle.write(np.array([graph.n, graph.kmax], dtype=HEADER_DTYPE).tobytes())
        handle.write(np.ascontiguousarray(graph.indices, dtype=INDEX_DTYPE).tobytes())
        handle.write(np.ascontiguousarray(graph.distances, dtype=DISTANCE_DTYPE).tobytes())
    return path


def load_graph(path, dim: int, metric: str = Metric.EUCLIDEAN) -> NeighborGraph:
    raw = Path(path).read_bytes()
    header_size = 2 * HEADER_DTYPE.itemsize
    if len(raw) < header_size:
        raise NeighborError(f"truncated graph cache {path}")
    n, kmax = (int(v) for v in np.frombuffer(raw[:header_size], dtype=HEADER_DTYPE))
    index_size = n * kmax * INDEX_DTYPE.itemsize
    expected = header_size + index_size + n * kmax * DISTANCE_DTYPE.itemsize
    if len(raw) != expected:
        raise NeighborError(f"graph cache {path} has {len(raw)} bytes, expected {expected}")
    indices = np.frombuffer(raw[header_size:header_size + index_size], dtype=INDEX_DTYPE)
    distances = np.frombuffer(raw[header_size + index_size:], dtype=DISTANCE_DTYPE)
    return NeighborGraph(
        indices.reshape(n, kmax).astype(np.intp),
        distances.reshape(n, kmax).astype(np.float64),
        dim=dim, metric=metric,
    )


def cache_path(dataset: Dataset, kmax: int, cache_dir=None,
               metric: str = Metric.EUCLIDEAN) -> Path:
    cache_dir = Path(cache_dir or setting('DAO_CACHE_DIR'))
    return cache_dir / f"{dataset.fingerprint()[:24]}-k{kmax}-{metric}.knn"


def cached_neighbor_graph(dataset: Dataset, kmax: int, method: str | None = None,
                          threads: int | None = None, cache_dir=None,
                          metric: str = Metric.EUCLIDEAN) -> NeighborGraph:
    """Load the graph from the on-disk cache, building and storing it on a miss."""
    path = cache_path(dataset, kmax, cache_dir, metric)
    if path.is_file():
        graph = load_graph(path, dataset.d, metric)
        if graph.n == dataset.n and graph.kmax == kmax:
            logger.info(f"Graph cache hit for {dataset.name}: {path.name}")
            return graph
        logger.warning(f"Ignoring stale graph cache {path}")
    logger.info(f"Graph cache miss for {dataset.name}, building kmax={kmax}")
    graph = build_neighbor_graph(dataset, kmax, method, threads, metric)
    save_graph(graph, path)
    return graph
