from outliers.exceptions import DaoError


class SynthesisError(DaoError):
    pass


class EvaluationError(DaoError):
    pass


class IncompleteGridError(EvaluationError):
    """Records do not cover the cells an analysis needs."""

    def __init__(self, analysis: str, missing):
        self.analysis = analysis
        self.missing = list(missing)
        cells = ', '.join(str(cell) for cell in self.missing[:20])
        more = f" (+{len(self.missing) - 20} more)" if len(self.missing) > 20 else ''
        super().__init__(f"{analysis}: incomplete grid, missing {cells}{more}")
