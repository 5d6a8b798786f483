"""Exception types shared across the package."""


class EpisimError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(EpisimError, ValueError):
    """Invalid input: a field, file or request violates its contract."""


class IntegrationError(EpisimError):
    """Numerical integration failed (non-finite values, excessive clamping)."""


class ZeroPopulationError(EpisimError):
    """A contact term requires mixing with a group whose living population is zero."""


class FormatError(EpisimError):
    """A persisted artifact does not follow the interchange format."""
