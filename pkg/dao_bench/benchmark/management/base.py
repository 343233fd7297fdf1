from typing import Any

from django.core.management.base import BaseCommand, CommandError

from outliers.exceptions import ConfigurationError, DaoError

from ..exceptions import IncompleteGridError

USAGE_ERROR = 1
DATA_ERROR = 2
INCOMPLETE_GRID = 3


def command_error(error: DaoError) -> CommandError:
    if isinstance(error, IncompleteGridError):
        return CommandError(error, returncode=INCOMPLETE_GRID)
    if isinstance(error, ConfigurationError):
        return CommandError(error, returncode=USAGE_ERROR)
    return CommandError(error, returncode=DATA_ERROR)


class DaoCommand(BaseCommand):
    """Management command whose domain errors leave with a meaningful exit code."""

    def handle(self, *args: Any, **options: Any) -> str | None:
        try:
            return self.perform(*args, **options)
        except DaoError as e:
            raise command_error(e) from e

    def perform(self, *args: Any, **options: Any) -> str | None:
        raise NotImplementedError
