"""Exception hierarchy shared across the package."""


class CpdError(Exception):
    """Base class for all errors raised by cfcpd."""


class InvalidConfigError(CpdError, ValueError):
    """A configuration value is out of range or inconsistent."""


class SegmentInfeasibleError(CpdError):
    """A model cannot be fitted on the requested index set."""

    def __init__(self, message, interval=None):
        super().__init__(message)
        self.interval = interval


class NumericError(CpdError, ValueError):
    """Non-finite input or output in a numerical routine."""


class TuningFailedError(CpdError):
    """Every candidate in a tuning grid failed."""


class UnsupportedModelError(CpdError, TypeError):
    """The requested diagnostic is not defined for this model."""


class EnumerationLimitError(CpdError):
    """Brute-force enumeration would exceed its configured bound."""


class DataError(CpdError, ValueError):
    """Malformed or inconsistent input data."""
