"""Exception hierarchy shared by all ghosteval modules."""


class GhostEvalError(Exception):
    """Base class for all library errors."""


class PackFormatError(GhostEvalError):
    """Binary container is corrupt: bad magic, version, or truncated payload."""


class PackValidationError(GhostEvalError):
    """Container parsed but the content violates an invariant."""


class FitError(GhostEvalError):
    """A class does not have enough correctly classified samples to fit."""


class DegenerateStatisticsError(GhostEvalError):
    """A statistic is undefined on this input (zero variance and friends)."""
