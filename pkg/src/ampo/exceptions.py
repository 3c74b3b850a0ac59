"""Exception types shared across the package."""


class AmpoError(Exception):
    """Base class for all package errors."""


class DomainError(AmpoError, ValueError):
    """An argument lies outside the domain of a potential or a map."""


class SimplexError(AmpoError, ValueError):
    """A vector that must be a probability vector is not one."""


class SupportError(AmpoError, ValueError):
    """A Bregman divergence was requested at a boundary point where it is undefined."""


class ProjectionInfeasibleError(AmpoError, ValueError):
    """The normalizer search cannot reach unit mass for this potential."""


class NumericalError(AmpoError, ArithmeticError):
    """A computation produced a non-finite value or failed to converge."""


class ConfigError(AmpoError, ValueError):
    """A configuration key or value could not be parsed."""
