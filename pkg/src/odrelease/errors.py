"""Exception types shared across the package."""


class ODReleaseError(Exception):
    """Base class for all package errors."""


class ConfigError(ODReleaseError):
    """Invalid configuration or parameter values."""


class DataError(ODReleaseError):
    """Input data violates a documented precondition."""


class SchemaError(DataError):
    """Attribute schema violation: unknown attribute, bad label, mismatch."""


class EmptyInputError(DataError):
    """An operation that needs mass received an empty histogram."""
