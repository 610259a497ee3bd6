# exciton_pimc/errors.py

from typing import Optional


class PimcError(Exception):
    """Base class for every error raised by exciton_pimc."""


class ConfigError(PimcError):
    """Invalid run configuration: syntax, range or unknown key."""

    def __init__(self, message: str, line: Optional[int] = None, key: Optional[str] = None):
        self.line = line
        self.key = key
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}{message}")


class DeadConfigurationError(PimcError):
    """The cyclic-averaged estimator has a non-positive or non-finite trace."""


class NonSymmetricMatrixError(PimcError, ValueError):
    pass


class InsufficientBatchesError(PimcError):
    pass


class DegenerateSeriesError(PimcError):
    pass


class GridSizeError(PimcError):
    pass


class EmptyHistogramError(PimcError):
    pass
