"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Raised for non-finite data or arguments outside an operation's domain."""


class UndefinedSeminormError(InvalidInputError):
    """Raised when a seminorm is requested on a grid that cannot support it."""


class ConfigurationError(ValueError):
    """Raised for structurally invalid specs, families, or policies."""


class ResolutionError(ConfigurationError):
    """Raised when a requested probe is below the grid resolution."""


class NumericalDegeneracyError(RuntimeError):
    """Raised when a computed quantity loses the structure the scheme needs
    (e.g. a covariance that is no longer positive semidefinite)."""
