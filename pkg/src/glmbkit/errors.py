"""Exception types raised across the package."""


class GlmbError(Exception):
    """Base class for package errors."""


class EmptyDensity(GlmbError):
    pass


class InvalidCovariance(GlmbError):
    pass


class DimensionMismatch(GlmbError, ValueError):
    pass


class UnitMismatch(GlmbError, ValueError):
    pass


class IntegrationFailure(GlmbError):
    pass


class TooLarge(GlmbError):
    pass


class LabelClash(GlmbError, ValueError):
    pass


class NoActions(GlmbError):
    pass


class FilterDivergence(GlmbError):
    """All components of a density were lost during a recursion step."""


class ConfigError(GlmbError, ValueError):
    pass


class CapExceededWarning(UserWarning):
    """Association enumeration was pruned before exhausting all maps."""
