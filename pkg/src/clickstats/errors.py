"""Exception types shared across the package."""


class ClickStatsError(Exception):
    """Base class for all package errors."""


class ValidationError(ClickStatsError, ValueError):
    """Invalid parameters or malformed input objects."""


class TruncationError(ClickStatsError):
    """Photon-number truncation would discard more mass than allowed."""


class SizeError(ClickStatsError):
    """A combinatorial enumeration exceeds the configured cap."""


class DegenerateError(ClickStatsError):
    """A statistic has a vanishing denominator on the given data."""


class DomainError(ClickStatsError, ValueError):
    """Argument outside the domain of an analytic expression."""


class FitError(ClickStatsError):
    """Calibration fit cannot be performed."""


class ParseError(ClickStatsError):
    """A data file could not be parsed.

    ``line`` is the 1-based line number of the offending row, if known.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
