from pathlib import Path
from typing import Any

from django.core.management.base import CommandError

from ...evaluation import read_records_csv
from ...reports import Analysis, report
from ..base import USAGE_ERROR, DaoCommand


class Command(DaoCommand):
    help = 'Turn an EvalRecord CSV into figure data, regression tables, ranks or runtimes.'

    def add_arguments(self, parser):
        parser.add_argument('records', help='records.csv written by the run command')
        parser.add_argument('analyses', nargs='+', choices=Analysis.values)
        parser.add_argument('--output', help='target directory, defaults to the records directory')
        parser.add_argument('--alpha', type=float, help='Nemenyi significance level')
        parser.add_argument('--method', help='DAO method to compare against, e.g. DAO_MLE')

    def perform(self, *args: Any, **options: Any) -> str | None:
        records = Path(options['records'])
        if not records.is_file():
            raise CommandError(f"records file not found: {records}", returncode=USAGE_ERROR)
        frame = read_records_csv(records)
        output = Path(options['output'] or records.parent)
        for analysis in options['analyses']:
            written = report(frame, analysis, output, alpha=options['alpha'], method=options['method'])
            self.stdout.write(self.style.SUCCESS(
                f"{analysis}: {', '.join(path.name for path in written)} written to {output}"))
