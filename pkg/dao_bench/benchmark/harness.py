"""
Benchmark runs: load or generate datasets, sweep every detector over its
neighborhood sizes and collect one EvalRecord per (dataset, method).
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import yaml

from outliers.conf import setting, thread_count
from outliers.dataset import Dataset, load_csv, warn_if_indistinct
from outliers.detectors import Detector, write_scores_csv
from outliers.exceptions import ConfigurationError
from outliers.lid import LidEstimator, LidProfile, estimate_mle
from outliers.neighbors import KnnMethod, build_neighbor_graph, cached_neighbor_graph

from .evaluation import EvalRecord, dispersion_R, morans_I_maxmag, write_records_csv
from .exceptions import EvaluationError
from .sweeps import LidConfig, sweep, time_detector
from .synthgen import benchmark_suite, parse_dims

logger = logging.getLogger(__name__)

RECORDS_FILE = 'records.csv'


@dataclass(frozen=True)
class RunConfig:
    datasets: tuple[str, ...] = ()
    # {reps, dims, plus any SynthSpec field}; generated in memory with seed0 = seed
    synth: dict | None = None
    detectors: tuple[str, ...] = tuple(Detector.values)
    detector_k_range: tuple[int, int, int] | None = None
    lid_estimators: tuple[str, ...] = (LidEstimator.MLE,)
    lid_k_grid: tuple[int, ...] | None = None
    seed: int = 0
    threads: int | None = None
    output_dir: str | None = None
    cache: bool = False
    cache_dir: str | None = None
    knn_method: str | None = None
    timing: bool = False
    dump_scores: bool = False

    def __post_init__(self):
        unknown = set(self.detectors) - set(Detector.values)
        if unknown:
            raise ConfigurationError(f"unknown detectors {sorted(unknown)}, choose from {Detector.values}")
        if not self.detectors:
            raise ConfigurationError("at least one detector is needed")
        unknown = set(self.lid_estimators) - set(LidEstimator.values)
        if unknown:
            raise ConfigurationError(f"unknown LID estimators {sorted(unknown)}, choose from {LidEstimator.values}")
        if Detector.DAO in self.detectors and not self.lid_estimators:
            raise ConfigurationError("DAO needs at least one LID estimator")
        if self.knn_method is not None and self.knn_method not in KnnMethod.values:
            raise ConfigurationError(f"unknown neighbor search method {self.knn_method!r}")
        start, stop, step = self.k_range_bounds
        if start < 1 or step < 1 or stop < start:
            raise ConfigurationError(f"invalid detector k range {start}..{stop}:{step}")
        if not self.datasets and not self.synth:
            raise ConfigurationError("no datasets: give CSV paths or a synth section")

    @property
    def k_range_bounds(self) -> tuple[int, int, int]:
        bounds = self.detector_k_range or setting('DAO_DETECTOR_K_RANGE')
        if len(bounds) == 2:
            bounds = (*bounds, 1)
        return tuple(int(b) for b in bounds)

    @property
    def k_range(self) -> list[int]:
        start, stop, step = self.k_range_bounds
        return list(range(start, stop + 1, step))

    @property
    def output_path(self) -> Path:
        return Path(self.output_dir or setting('DAO_OUTPUT_DIR'))

    @property
    def methods(self) -> list[tuple[str, str | None]]:
        """(detector, estimator) pairs in config order; DAO once per estimator."""
        pairs = []
        for detector in self.detectors:
            if detector == Detector.DAO:
                pairs.extend((detector, estimator) for estimator in self.lid_estimators)
            else:
                pairs.append((detector, None))
        return pairs

    @classmethod
    def from_file(cls, path, **overrides) -> 'RunConfig':
        """Read a YAML mapping; non-None keyword overrides win over file values."""
        try:
            with open(path) as handle:
                values = yaml.safe_load(handle) or {}
        except OSError as e:
            raise ConfigurationError(f"cannot read config {path}: {e}") from None
        except yaml.YAMLError as e:
            raise ConfigurationError(f"malformed config {path}: {e}") from None
        if not isinstance(values, dict):
            raise ConfigurationError(f"config {path} must be a mapping")
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls.from_mapping(values)

    @classmethod
    def from_mapping(cls, values: dict) -> 'RunConfig':
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys {sorted(unknown)}")
        values = dict(values)
        if isinstance(values.get('detector_k_range'), str):
            values['detector_k_range'] = parse_k_range(values['detector_k_range'])
        for key in ('datasets', 'detectors', 'lid_estimators', 'lid_k_grid', 'detector_k_range'):
            if values.get(key) is not None:
                if isinstance(values[key], str):
                    values[key] = (values[key],)
                values[key] = tuple(values[key])
        if values.get('detector_k_range') is not None:
            values['detector_k_range'] = tuple(int(k) for k in values['detector_k_range'])
        return cls(**values)


def parse_k_range(text: str) -> tuple[int, int, int]:
    """'5..100:5' or '5..100' into (start, stop, step); a single '10' is one k."""
    text = str(text).strip()
    try:
        bounds, _, step = text.partition(':')
        start, _, stop = bounds.partition('..')
        start = int(start)
        return start, int(stop) if stop else start, int(step) if step else 1
    except ValueError:
        raise ConfigurationError(f"cannot parse k range {text!r}") from None


@dataclass
class RunResult:
    records: list[EvalRecord] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)
    path: Path | None = None


def collect_datasets(config: RunConfig) -> list[Dataset]:
    datasets = []
    for entry in config.datasets:
        path = Path(entry)
        files = sorted(path.glob('*.csv')) if path.is_dir() else [path]
        if path.is_dir() and not files:
            logger.warning(f"No CSV files in {path}")
        datasets.extend(load_csv(file) for file in files)
    if config.synth:
        synth = dict(config.synth)
        reps = int(synth.pop('reps', 1))
        dims = synth.pop('dims', None)
        if dims is not None:
            synth['dims_c2'] = parse_dims(dims) if isinstance(dims, (str, int)) else [int(d) for d in dims]
        datasets.extend(benchmark_suite(reps, seed0=config.seed, threads=config.threads, **synth))
    return datasets


def _usable_ks(dataset: Dataset, config: RunConfig) -> list[int]:
    ks = config.k_range
    usable = [k for k in ks if k <= dataset.n - 1]
    if len(usable) < len(ks):
        logger.warning(f"{dataset.name}: k range truncated to k <= {dataset.n - 1}")
    return usable


def _graph_kmax(dataset: Dataset, config: RunConfig, ks: list[int]) -> int:
    wanted = [max(ks), setting('DAO_ANALYSIS_LID_K'), setting('DAO_MORANS_K_RANGE')[1]]
    if Detector.DAO in config.detectors:
        wanted.extend(config.lid_k_grid or setting('DAO_LID_K_GRID'))
    return max(2, min(max(wanted), dataset.n - 1))


def analysis_profile(graph, outcomes) -> LidProfile:
    """The LID profile whose dispersion and autocorrelation get reported."""
    for outcome in outcomes:
        if outcome.lids is not None:
            return outcome.lids
    k = max(2, min(setting('DAO_ANALYSIS_LID_K'), graph.kmax))
    return estimate_mle(graph, k)


def _spatial_statistics(dataset: Dataset, graph, lids: LidProfile) -> dict:
    low, high = setting('DAO_MORANS_K_RANGE')
    k_range = range(min(low, graph.kmax), min(high, graph.kmax) + 1)
    statistics = {'dispersion_R': dispersion_R(lids)}
    try:
        statistics['morans_I'], statistics['morans_k'] = morans_I_maxmag(lids.log_ids, graph, k_range)
    except EvaluationError as e:
        logger.warning(f"{dataset.name}: {e}")
    return statistics


def run_dataset(dataset: Dataset, config: RunConfig, pool: ThreadPoolExecutor) -> list[EvalRecord]:
    ks = _usable_ks(dataset, config)
    if not ks:
        raise EvaluationError(f"{dataset.name}: no k in the detector range fits n={dataset.n}")
    kmax = _graph_kmax(dataset, config, ks)
    if config.cache:
        graph = cached_neighbor_graph(dataset, kmax, config.knn_method, config.threads, config.cache_dir)
    else:
        graph = build_neighbor_graph(dataset, kmax, config.knn_method, config.threads)

    methods = config.methods
    lid_configs = [
        LidConfig(estimator, config.lid_k_grid) if estimator else None for _, estimator in methods
    ]

    def evaluate(detector, lid_config):
        return sweep(dataset, detector, ks, lid_config, graph)

    outcomes = list(pool.map(evaluate, [detector for detector, _ in methods], lid_configs))

    primary = analysis_profile(graph, outcomes)
    shared = _spatial_statistics(dataset, graph, primary)
    records = []
    for (detector, _), lid_config, outcome in zip(methods, lid_configs, outcomes):
        statistics = shared
        if outcome.lids is not None and outcome.lids is not primary:
            statistics = _spatial_statistics(dataset, graph, outcome.lids)
        record = replace(outcome.record, **statistics)
        if config.timing:
            mean, std = time_detector(dataset, detector, ks, lid_config, graph)
            record = replace(record, runtime_mean=mean, runtime_std=std)
        if config.dump_scores:
            write_scores_csv(outcome.scores, config.output_path / 'scores' / f"{dataset.name}_{record.method}.csv")
        records.append(record)
    logger.info(f"{dataset.name}: " + ', '.join(f"{r.method} {r.roc_auc:.3f}" for r in records))
    return records


def run_benchmark(config: RunConfig) -> RunResult:
    """Evaluate every configured method on every labeled dataset.

    Records come out in dataset order, then method order; the CSV does not
    depend on the worker count. Timing columns are filled only with
    ``config.timing``.
    """
    result = RunResult()
    datasets = collect_datasets(config)
    with ThreadPoolExecutor(max_workers=thread_count(config.threads)) as pool:
        for dataset in datasets:
            if not dataset.has_labels:
                logger.warning(f"Skipping {dataset.name}: no outlier labels")
                result.skipped.append(dataset.name)
                continue
            if dataset.outlier_count == 0:
                logger.warning(f"Skipping {dataset.name}: labels mark no outliers")
                result.skipped.append(dataset.name)
                continue
            warn_if_indistinct(dataset)
            result.records.extend(run_dataset(dataset, config, pool))

    config.output_path.mkdir(parents=True, exist_ok=True)
    result.path = write_records_csv(result.records, config.output_path / RECORDS_FILE)
    logger.info(f"Wrote {len(result.records)} records to {result.path}")
    return result
