"""Exception types shared across the package."""


class SteinGofError(Exception):
    """Base class for all package errors."""


class InvalidModelError(SteinGofError):
    """Model parameters are malformed (non-SPD covariance, bad simplex, ...)."""


class ConfigError(SteinGofError):
    """A run/model configuration is inconsistent or references unknown options."""


class SampleSizeError(SteinGofError):
    """An operation received fewer observations than it requires."""


class DegenerateSampleError(SteinGofError):
    """The sample carries no usable variation (all points identical, zero variance pairs)."""


class IngestionError(SteinGofError):
    """A data file could not be parsed into a numeric sample."""


class UndefinedEfficiencyError(SteinGofError):
    """Efficiency ratio requested at a point where both slopes vanish."""
