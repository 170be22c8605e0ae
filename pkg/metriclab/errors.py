# metriclab/errors.py


class MetricLabError(Exception):
    """Base class for every error raised by metriclab."""


class ConfigError(MetricLabError, ValueError):
    pass


class DomainSpecError(MetricLabError, ValueError):
    pass


class DomainError(MetricLabError, ValueError):
    pass


class FootPointAmbiguityError(DomainError):
    pass


# =====================================================
# NUMERICAL FAILURES (exit code 3 when they escape a run)
# =====================================================
class NumericalError(MetricLabError, ArithmeticError):
    pass


class QuadratureError(NumericalError):
    pass


class SamplingError(NumericalError):
    pass


class IndefiniteMetricError(NumericalError):
    pass


class ZeroSetError(NumericalError):
    """Evaluation point lies on the zero set of K(., p)."""


class SolverError(NumericalError):
    pass


class InfeasibleSlackError(NumericalError):
    pass


class CollocationError(NumericalError):
    pass


class CurvatureValidationError(NumericalError):
    pass


class LuBoundViolation(NumericalError):
    pass
