from pathlib import Path
from typing import Any

from outliers.conf import setting
from outliers.dataset import load_csv, warn_if_indistinct
from outliers.lid import LidEstimator, estimate, write_profile_csv
from outliers.neighbors import KnnMethod, build_neighbor_graph, cached_neighbor_graph

from ...evaluation import dispersion_R
from ..base import DaoCommand


class Command(DaoCommand):
    help = 'Estimate per-point LID for one dataset and write the profile as CSV.'

    def add_arguments(self, parser):
        parser.add_argument('dataset', help='CSV file')
        parser.add_argument('--estimator', choices=LidEstimator.values, default=LidEstimator.MLE)
        parser.add_argument('--k', type=int, default=setting('DAO_ANALYSIS_LID_K'),
                            help='neighborhood size (TwoNN always uses 2)')
        parser.add_argument('--label-column', help='header name or zero-based position of the label column')
        parser.add_argument('--output', help='target CSV, defaults to <dataset>_lid_<estimator>_k<k>.csv')
        parser.add_argument('--cache', action='store_true')
        parser.add_argument('--knn-method', choices=KnnMethod.values)

    def perform(self, *args: Any, **options: Any) -> str | None:
        label_column = options['label_column']
        if label_column is not None and label_column.isdigit():
            label_column = int(label_column)
        dataset = load_csv(options['dataset'], label_column=label_column)
        warn_if_indistinct(dataset)

        estimator = options['estimator']
        k = 2 if estimator == LidEstimator.TWONN else options['k']
        if options['cache']:
            graph = cached_neighbor_graph(dataset, k, options['knn_method'])
        else:
            graph = build_neighbor_graph(dataset, k, options['knn_method'])
        profile = estimate(graph, estimator, k, dataset)

        source = Path(options['dataset'])
        output = Path(options['output'] or source.with_name(f"{source.stem}_lid_{estimator}_k{k}.csv"))
        write_profile_csv(profile, output)
        self.stdout.write(self.style.SUCCESS(
            f"{profile} for {dataset.name}: mean ID {profile.ids.mean():.3f}, "
            f"dispersion R {dispersion_R(profile):.4f}, written to {output}"))
