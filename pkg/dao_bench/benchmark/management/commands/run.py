from typing import Any

from django.core.management.base import CommandError

from outliers.detectors import Detector
from outliers.lid import LidEstimator
from outliers.neighbors import KnnMethod

from ...harness import RunConfig, parse_k_range, run_benchmark
from ..base import INCOMPLETE_GRID, DaoCommand


class Command(DaoCommand):
    help = 'Sweep every detector over labeled datasets and write one EvalRecord per (dataset, method).'

    def add_arguments(self, parser):
        parser.add_argument('datasets', nargs='*', help='CSV files or directories of CSV files')
        parser.add_argument('--config', help='YAML run configuration; flags override its values')
        parser.add_argument('--synth-reps', type=int, help='generate this many synthetic realizations per template')
        parser.add_argument('--synth-dims', help="dim_c2 templates for --synth-reps, e.g. '2,8,16,32'")
        parser.add_argument('--detectors', nargs='+', choices=Detector.values)
        parser.add_argument('--estimators', nargs='+', choices=LidEstimator.values,
                            help='LID estimators for DAO, one record each')
        parser.add_argument('--k-range', help="detector neighborhood sizes, e.g. '5..100:5'")
        parser.add_argument('--lid-k-grid', nargs='+', type=int)
        parser.add_argument('--seed', type=int)
        parser.add_argument('--threads', type=int)
        parser.add_argument('--output', help='directory for records.csv and score dumps')
        parser.add_argument('--cache', action='store_true', default=None, help='reuse neighbor graphs on disk')
        parser.add_argument('--cache-dir')
        parser.add_argument('--knn-method', choices=KnnMethod.values)
        parser.add_argument('--timing', action='store_true', default=None, help='fill the runtime columns')
        parser.add_argument('--dump-scores', action='store_true', default=None,
                            help='write the best-k scores of every record')

    def perform(self, *args: Any, **options: Any) -> str | None:
        overrides = {
            'datasets': options['datasets'] or None,
            'detectors': options['detectors'],
            'lid_estimators': options['estimators'],
            'detector_k_range': parse_k_range(options['k_range']) if options['k_range'] else None,
            'lid_k_grid': options['lid_k_grid'],
            'seed': options['seed'],
            'threads': options['threads'],
            'output_dir': options['output'],
            'cache': options['cache'],
            'cache_dir': options['cache_dir'],
            'knn_method': options['knn_method'],
            'timing': options['timing'],
            'dump_scores': options['dump_scores'],
        }
        if options['synth_reps']:
            overrides['synth'] = {'reps': options['synth_reps']}
            if options['synth_dims']:
                overrides['synth']['dims'] = options['synth_dims']
        if options['config']:
            config = RunConfig.from_file(options['config'], **overrides)
        else:
            config = RunConfig.from_mapping({key: value for key, value in overrides.items() if value is not None})

        result = run_benchmark(config)
        if not result.records and result.skipped:
            raise CommandError(f"all {len(result.skipped)} datasets were skipped (no usable labels)",
                               returncode=INCOMPLETE_GRID)
        if result.skipped:
            self.stdout.write(self.style.WARNING(f"Skipped (no usable labels): {', '.join(result.skipped)}"))
        self.stdout.write(self.style.SUCCESS(f"{len(result.records)} records written to {result.path}"))
