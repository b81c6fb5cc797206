"""Exception hierarchy shared by every module."""


class GaugeGlassError(Exception):
    """Base class for all package errors."""


class ConfigurationError(GaugeGlassError, ValueError):
    """Invalid model, parameters, sample or request."""


class CapacityError(GaugeGlassError):
    """An enumeration or quadrature size cap would be exceeded."""


class NumericalError(GaugeGlassError, ArithmeticError):
    """A non-finite value appeared during a computation."""


class ConsistencyError(GaugeGlassError):
    """Two routes that must agree internally did not."""
