"""
Synthetic benchmark: two Gaussian clusters living in random coordinate
subspaces of R^32, labeled by their Mahalanobis distance, then moved to a
general position by per-cluster translation and one global rotation.

One PCG64 stream drives everything; the draw order is subspace and samples of
cluster 1, subspace and samples of cluster 2, both translations, then (once a
candidate is accepted) the rotation matrix. Normals use numpy's ziggurat.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import partial

import numpy as np
from scipy.optimize import bisect
from scipy.special import gammainc

from outliers.conf import setting, thread_count
from outliers.dataset import Dataset

from .exceptions import SynthesisError

logger = logging.getLogger(__name__)

DEFAULT_DIMS_C2 = tuple(range(2, 33, 2))


@dataclass(frozen=True)
class SynthSpec:
    ambient_dim: int = 32
    cluster_size: int = 800
    dim_c1: int = 8
    dim_c2: int = 8
    outlier_quantile: float = 0.95
    reject_quantile: float = 0.99999
    translation_range: tuple[float, float] = (-10.0, 10.0)
    seed: int = 0
    retry_cap: int | None = None

    def __post_init__(self):
        if self.ambient_dim < 2:
            raise SynthesisError(f"ambient_dim must be at least 2, got {self.ambient_dim}")
        if not 1 <= self.dim_c1 <= self.ambient_dim:
            raise SynthesisError(f"dim_c1={self.dim_c1} outside [1, {self.ambient_dim}]")
        if not 2 <= self.dim_c2 <= self.ambient_dim:
            raise SynthesisError(f"dim_c2={self.dim_c2} outside [2, {self.ambient_dim}]")
        if self.cluster_size < 2:
            raise SynthesisError(f"cluster_size must be at least 2, got {self.cluster_size}")
        for name in ('outlier_quantile', 'reject_quantile'):
            if not 0 < getattr(self, name) < 1:
                raise SynthesisError(f"{name} must lie in (0, 1)")
        if self.reject_quantile <= self.outlier_quantile:
            raise SynthesisError("reject_quantile must exceed outlier_quantile")
        low, high = self.translation_range
        if not low < high:
            raise SynthesisError(f"empty translation range {self.translation_range}")

    @property
    def max_retries(self) -> int:
        return self.retry_cap if self.retry_cap is not None else setting('DAO_SYNTH_RETRY_CAP')


@dataclass(frozen=True)
class GenReport:
    seed: int
    rejections: int
    outliers_c1: int
    outliers_c2: int


@dataclass(frozen=True, eq=False)
class Realization:
    """Everything drawn for one accepted dataset, kept for inspection and tests."""
    spec: SynthSpec
    subspaces: tuple[np.ndarray, np.ndarray]
    latent: tuple[np.ndarray, np.ndarray]
    translations: tuple[np.ndarray, np.ndarray]
    rotation: np.ndarray
    labels: np.ndarray
    rejections: int
    points: np.ndarray = field(repr=False)

    @property
    def cluster(self) -> np.ndarray:
        size = self.spec.cluster_size
        return np.repeat([0, 1], size)


def chi2_quantile(m: int, p: float) -> float:
    """Inverse CDF of the chi-squared distribution with m degrees of freedom.

    Bisection on the regularized lower incomplete gamma P(m/2, x/2), absolute
    tolerance 1e-10.
    """
    if int(m) != m or m < 1:
        raise SynthesisError(f"degrees of freedom must be a positive integer, got {m}")
    if not 0 < p < 1:
        raise SynthesisError(f"probability must lie in (0, 1), got {p}")
    half = m / 2.0

    def excess(x):
        return gammainc(half, x / 2.0) - p

    high = max(1.0, float(m))
    while excess(high) < 0:
        high *= 2.0
    return float(bisect(excess, 0.0, high, xtol=1e-10, rtol=4 * np.finfo(float).eps, maxiter=500))


def mahalanobis_sq(points: np.ndarray, center: np.ndarray, subspace: np.ndarray) -> np.ndarray:
    """Squared Mahalanobis distance under identity covariance on ``subspace``.

    The generating covariance is singular in the ambient space; the distance is
    taken within the generating coordinates (pseudo-inverse semantics).
    """
    offset = points[:, subspace] - center[subspace]
    return (offset * offset).sum(axis=1)


def _embed(latent: np.ndarray, subspace: np.ndarray, ambient_dim: int) -> np.ndarray:
    points = np.zeros((len(latent), ambient_dim))
    points[:, subspace] = latent
    return points


def random_rotation(rng: np.random.Generator, dim: int) -> np.ndarray:
    """Orthonormal basis of a uniform [-1, 1] matrix, signs fixed so diag(R) > 0."""
    q, r = np.linalg.qr(rng.uniform(-1.0, 1.0, size=(dim, dim)))
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def realize(spec: SynthSpec) -> Realization:
    rng = np.random.default_rng(spec.seed)
    dims = (spec.dim_c1, spec.dim_c2)
    label_cut = [chi2_quantile(dim, spec.outlier_quantile) for dim in dims]
    reject_cut = [chi2_quantile(dim, spec.reject_quantile) for dim in dims]
    low, high = spec.translation_range

    for attempt in range(spec.max_retries + 1):
        subspaces, latent = [], []
        for dim in dims:
            subspaces.append(np.sort(rng.choice(spec.ambient_dim, size=dim, replace=False)))
            latent.append(rng.standard_normal((spec.cluster_size, dim)))
        translations = [rng.uniform(low, high, size=spec.ambient_dim) for _ in dims]

        points = np.vstack([
            _embed(z, subspace, spec.ambient_dim) + shift
            for z, subspace, shift in zip(latent, subspaces, translations)
        ])
        inside = [
            mahalanobis_sq(points, shift, subspace) < cut
            for shift, subspace, cut in zip(translations, subspaces, reject_cut)
        ]
        if not (inside[0] & inside[1]).any():
            break
        logger.debug(f"seed {spec.seed}: candidate {attempt} rejected, clusters overlap")
    else:
        raise SynthesisError(
            f"seed {spec.seed}: no separated realization within {spec.max_retries} retries "
            f"(dim_c1={spec.dim_c1}, dim_c2={spec.dim_c2})")

    # own-cluster distance on the latent coordinates, before any isometry
    labels = np.concatenate([
        ((z * z).sum(axis=1) > cut).astype(np.int8) for z, cut in zip(latent, label_cut)
    ])
    rotation = random_rotation(rng, spec.ambient_dim)
    return Realization(
        spec=spec,
        subspaces=tuple(subspaces),
        latent=tuple(latent),
        translations=tuple(translations),
        rotation=rotation,
        labels=labels,
        rejections=attempt,
        points=points @ rotation,
    )


def generate(spec: SynthSpec, dims_c2_grid=None) -> tuple[Dataset, GenReport]:
    """One labeled dataset from ``spec``.

    ``dims_c2_grid`` is the list of dim_c2 templates of the suite the dataset
    belongs to, if any; it is recorded in the metadata.
    """
    realization = realize(spec)
    size = spec.cluster_size
    report = GenReport(
        seed=spec.seed,
        rejections=realization.rejections,
        outliers_c1=int(realization.labels[:size].sum()),
        outliers_c2=int(realization.labels[size:].sum()),
    )
    if report.rejections:
        logger.info(f"seed {spec.seed}: {report.rejections} overlapping candidates regenerated")
    spec_fields = asdict(spec)
    spec_fields['translation_range'] = list(spec.translation_range)
    spec_fields['retry_cap'] = spec.max_retries
    metadata = {
        'generator': 'two-gaussian-subspaces',
        'spec': spec_fields,
        'dim_c1': spec.dim_c1,
        'dim_c2': spec.dim_c2,
        'cluster_sizes': [size, size],
        'subspace_c1': realization.subspaces[0].tolist(),
        'subspace_c2': realization.subspaces[1].tolist(),
        'report': asdict(report),
    }
    if dims_c2_grid is not None:
        metadata['dims_c2_grid'] = [int(dim) for dim in dims_c2_grid]
        metadata['dims_c2_grid_is_default'] = tuple(metadata['dims_c2_grid']) == DEFAULT_DIMS_C2
    dataset = Dataset(
        realization.points, realization.labels,
        name=f"synth_c2d{spec.dim_c2:02d}_s{spec.seed}",
        seed=spec.seed,
        metadata=metadata,
    )
    return dataset, report


def benchmark_suite(reps: int, dims_c2=DEFAULT_DIMS_C2, seed0: int = 0,
                    threads: int | None = None, **overrides) -> list[Dataset]:
    """reps realizations of every dim_c2 template; dataset i uses seed seed0 + i.

    Datasets are ordered repetition-major: index = rep * len(dims_c2) + j.
    """
    if reps < 1:
        raise SynthesisError(f"reps must be at least 1, got {reps}")
    dims_c2 = [int(dim) for dim in dims_c2]
    if not dims_c2:
        raise SynthesisError("at least one dim_c2 template is needed")
    base = SynthSpec(**overrides)
    specs = [
        replace(base, dim_c2=dim, seed=seed0 + rep * len(dims_c2) + j)
        for rep in range(reps) for j, dim in enumerate(dims_c2)
    ]
    with ThreadPoolExecutor(max_workers=thread_count(threads)) as pool:
        # the exact dim_c2 templates are a choice, recorded with every dataset
        datasets = [dataset for dataset, _ in pool.map(partial(generate, dims_c2_grid=dims_c2), specs)]
    logger.info(f"Generated {len(datasets)} synthetic datasets ({reps} reps x {len(dims_c2)} templates)")
    return datasets


def parse_dims(text: str) -> list[int]:
    """Parse '2..32:2', '8' or '2,8,16,32' into a list of dimensions."""
    text = str(text).strip()
    try:
        if '..' in text:
            bounds, _, step = text.partition(':')
            start, stop = (int(part) for part in bounds.split('..'))
            return list(range(start, stop + 1, int(step) if step else 1))
        return [int(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise SynthesisError(f"cannot parse dimension list {text!r}") from None
