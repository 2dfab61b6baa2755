"""Exception hierarchy shared across the package."""


class DteLabError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(DteLabError):
    """Input data violates the dataset contract."""


class EmptyArmError(ValidationError):
    """A treatment arm has no units where one is required."""


class DegenerateGridError(DteLabError):
    """Grid construction failed because the outcome quantile is zero."""


class EstimationError(DteLabError):
    """An estimator precondition was violated."""


class ConfigError(DteLabError):
    """A configuration file or CLI flag is malformed."""
