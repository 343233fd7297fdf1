from pathlib import Path
from typing import Any

from outliers.conf import setting
from outliers.dataset import write_csv

from ...synthgen import DEFAULT_DIMS_C2, SynthSpec, benchmark_suite, parse_dims
from ..base import DaoCommand


class Command(DaoCommand):
    help = 'Generate the two-cluster synthetic benchmark as CSV files with JSON sidecars.'

    def add_arguments(self, parser):
        parser.add_argument('--reps', type=int, default=1, help='realizations per dim_c2 template')
        parser.add_argument('--dims', default=f"{DEFAULT_DIMS_C2[0]}..{DEFAULT_DIMS_C2[-1]}:2",
                            help="dim_c2 templates, e.g. '2..32:2' or '2,8,16,32'")
        parser.add_argument('--seed', type=int, default=0, help='seed of the first dataset')
        parser.add_argument('--cluster-size', type=int, default=SynthSpec.cluster_size)
        parser.add_argument('--dim-c1', type=int, default=SynthSpec.dim_c1)
        parser.add_argument('--threads', type=int, default=None)
        parser.add_argument('--output', default=None, help='target directory')

    def perform(self, *args: Any, **options: Any) -> str | None:
        output = Path(options['output'] or Path(setting('DAO_OUTPUT_DIR')) / 'datasets')
        datasets = benchmark_suite(
            options['reps'], parse_dims(options['dims']), seed0=options['seed'],
            threads=options['threads'],
            cluster_size=options['cluster_size'], dim_c1=options['dim_c1'],
        )
        for dataset in datasets:
            write_csv(dataset, output / f"{dataset.name}.csv")
        self.stdout.write(self.style.SUCCESS(f"{len(datasets)} datasets written to {output}"))
