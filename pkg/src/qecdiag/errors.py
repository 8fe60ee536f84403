"""Exception types shared across the package."""


class QECDiagError(Exception):
    """Base class for all package errors."""


class UsageError(QECDiagError, ValueError):
    """Arguments are inconsistent (sizes, ranges, missing data)."""


class ValidationError(QECDiagError, ValueError):
    """A code, channel or dataset fails its structural checks."""


class CapacityError(QECDiagError):
    """The request needs an enumeration larger than we support."""
