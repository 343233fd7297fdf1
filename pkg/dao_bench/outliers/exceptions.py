class DaoError(Exception):
    """Base class for every error raised by the outlier detection apps."""


class DatasetError(DaoError):
    pass


class NeighborError(DaoError):
    pass


class EstimationError(DaoError):
    pass


class DetectorError(DaoError):
    pass


class ConfigurationError(DaoError):
    pass
