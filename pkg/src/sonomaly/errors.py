"""Exception hierarchy shared by the library, the service, and the CLI.

Every SonomalyError is a *user-facing* condition (bad parameters, bad input
files, undefined metrics, ...) and maps to HTTP 400 / CLI exit code 1.
Anything else escaping the core is treated as an internal error (500 / 2).
"""

from __future__ import annotations


class SonomalyError(Exception):
    """Base class for all user-facing errors."""


class ParameterError(SonomalyError):
    """A parameter violates a documented precondition."""


class DegenerateSignalError(SonomalyError):
    """A signal has zero power where nonzero power is required."""


class BoundsError(SonomalyError):
    """An index or interval falls outside the signal it refers to."""


class LengthError(SonomalyError):
    """A signal is too short for the requested transform."""


class SizeError(SonomalyError):
    """An array is too small for the requested operation."""


class ShapeError(SonomalyError):
    """Array shapes are inconsistent."""


class StatisticsError(SonomalyError):
    """Not enough data to estimate the requested statistics."""


class NumericalError(SonomalyError):
    """A numerical routine failed (for example a non-PD covariance)."""


class DataError(SonomalyError):
    """A collection that must be non-empty is empty, or data is unusable."""


class MetricUndefinedError(SonomalyError):
    """The requested metric is undefined for the given labels."""


class ConfigurationError(SonomalyError):
    """An invalid combination of configuration values."""


class FormatError(SonomalyError):
    """A binary or text artifact does not conform to its file format."""

    def __init__(self, message: str, *, path: str | None = None, offset: int | None = None):
        detail = message
        if path is not None:
            detail += f" (file: {path}"
            detail += f", byte offset {offset})" if offset is not None else ")"
        elif offset is not None:
            detail += f" (byte offset {offset})"
        super().__init__(detail)
        self.path = path
        self.offset = offset
