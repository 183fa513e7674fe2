"""Exception hierarchy shared by the whole package."""


class MemaugError(Exception):
    """Base class for all package errors."""


class UsageError(MemaugError):
    """An operation was called in a state where it is not defined."""


class InvalidPomdpError(MemaugError, ValueError):
    """A POMDP definition violates one of its invariants.

    ``path`` locates the first offending entry (e.g. ``dynamics[3][1]``).
    """

    def __init__(self, message, path=""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class InconsistentHistoryError(MemaugError):
    """A belief update was asked to condition on an impossible observation."""


class UnsupportedConfigurationError(MemaugError):
    """The requested computation is not defined for this model (e.g. gamma=1 with no horizon)."""


class CapacityError(MemaugError):
    """A construction would exceed its configured size cap.

    ``partial`` optionally carries whatever was computed before the cap was hit.
    """

    def __init__(self, message, partial=None):
        self.partial = partial
        super().__init__(message)


class ConfigError(MemaugError):
    """An experiment configuration failed validation."""

    def __init__(self, message, field=""):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)
