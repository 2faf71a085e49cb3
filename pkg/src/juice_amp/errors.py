"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid scenario or experiment configuration."""


class NotPsdError(ValueError):
    """Matrix expected to be positive semidefinite has a significantly negative eigenvalue."""


class SingularMatrixError(ValueError):
    """Matrix expected to be positive definite is singular (or indefinite)."""


class StateError(RuntimeError):
    """AMP state became invalid (e.g. non-positive-definite effective noise covariance)."""


class DivergenceError(RuntimeError):
    """AMP residual blew up, or too many trials diverged for a sweep to be trusted."""


class DegenerateSpectrumError(ValueError):
    """Quadratic-form spectrum collapsed to zero (test statistic degenerate)."""


class UndefinedMetricError(ValueError):
    """Requested metric is undefined for the given outcomes (e.g. no active users at all)."""
