"""Exception hierarchy shared by every module."""


class AvgCtlError(Exception):
    """Base class for library errors."""


class DomainError(AvgCtlError, ValueError):
    """A state, angle or parameter lies outside the declared domain."""


class UnsupportedOrderError(AvgCtlError):
    pass


class NotConfiguredError(AvgCtlError):
    pass


class QuadratureConvergenceError(AvgCtlError):
    """Adaptive quadrature ran out of subdivisions.

    The best available estimate is kept on ``estimate`` / ``error``.
    """

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class UndefinedGradientError(AvgCtlError):
    pass


class DegenerateMetricError(AvgCtlError):
    pass


class DegenerateExtremalError(AvgCtlError):
    pass


class AmbiguousSwitchError(AvgCtlError):
    pass


class RescaleError(AvgCtlError):
    pass


class InvalidCenterError(AvgCtlError, ValueError):
    pass


class ShootingFailedError(AvgCtlError):
    pass


class ProbeFailureError(AvgCtlError):
    pass


class ConfigError(AvgCtlError, ValueError):
    """Malformed run configuration (CLI usage error)."""
