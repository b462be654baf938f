"""Exception types shared across the package."""


class MacPrecodeError(ValueError):
    """Base class for every error raised by this package."""


class ConfigurationError(MacPrecodeError):
    """Raised when a requested object cannot be built from the given options."""


class ValidationError(MacPrecodeError):
    """Raised when supplied data violates a structural contract."""


class SizeLimitError(MacPrecodeError):
    """Raised when an enumeration would exceed a configured size cap."""


class ParseError(MacPrecodeError):
    """Raised when a config or artifact file cannot be parsed."""
