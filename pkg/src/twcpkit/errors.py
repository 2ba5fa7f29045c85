"""Exception hierarchy.

Everything raised for bad input data derives from :class:`DataError`, so the
command line can map it to a single exit status.
"""


class TwcpkitError(Exception):
    pass


class DataError(TwcpkitError, ValueError):
    """Input data is malformed, inconsistent or outside the supported range."""


class InvalidSpecError(DataError):
    pass


class AlignmentError(DataError):
    pass


class OutOfRangeError(DataError):
    """A query falls outside the span or grid of the data (no extrapolation)."""


class EpochRangeError(OutOfRangeError):
    pass


class CoverageError(DataError):
    def __init__(self, message, uncovered=()):
        super().__init__(message)
        self.uncovered = list(uncovered)


class SeriesTooShortError(DataError):
    pass


class ZeroCommonDataError(DataError):
    pass


class IonexParseError(DataError):
    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class ConfigError(DataError):
    pass


class AmbiguousStitchError(TwcpkitError):
    """An inter-segment jump could not be assigned an integer safely."""

    def __init__(self, message, boundary=None, margin=None):
        super().__init__(message)
        self.boundary = boundary
        self.margin = margin


class StitchGapError(AmbiguousStitchError):
    pass
