from typing import Any

from outliers.dataset import load_csv
from outliers.neighbors import KnnMethod, cache_path, cached_neighbor_graph, load_graph

from ..base import DaoCommand


class Command(DaoCommand):
    help = 'Build or inspect the binary neighbor graph cache of a dataset.'

    def add_arguments(self, parser):
        parser.add_argument('dataset', help='CSV file')
        parser.add_argument('--kmax', type=int, default=100, help='truncated to n - 1')
        parser.add_argument('--cache-dir')
        parser.add_argument('--knn-method', choices=KnnMethod.values)
        parser.add_argument('--inspect', action='store_true', help='report on the cache file without building')

    def perform(self, *args: Any, **options: Any) -> str | None:
        dataset = load_csv(options['dataset'])
        kmax = min(options['kmax'], dataset.n - 1)
        path = cache_path(dataset, kmax, options['cache_dir'])
        if options['inspect']:
            if not path.is_file():
                self.stdout.write(f"No cache for {dataset.name} at kmax={kmax} ({path})")
                return
            graph = load_graph(path, dataset.d)
            self.stdout.write(f"{path}: n={graph.n}, kmax={graph.kmax}, {path.stat().st_size} bytes")
            return
        graph = cached_neighbor_graph(dataset, kmax, options['knn_method'], cache_dir=options['cache_dir'])
        self.stdout.write(self.style.SUCCESS(f"{graph} cached at {path}"))
