"""Exception types raised across the package."""


class KasnerLinError(Exception):
    """Base class for all package errors."""


class ExponentDomain(KasnerLinError):
    """Exponents give a negative scalar amplitude squared."""


class ExponentSign(KasnerLinError):
    """A Kasner exponent is not strictly positive under the strict policy."""


class NonpositiveTime(KasnerLinError):
    pass


class MissingLapse(KasnerLinError):
    pass


class StaleLapse(KasnerLinError):
    """Stored lapse no longer matches the metric perturbation."""


class ZeroScalarAmplitude(KasnerLinError):
    pass


class SolveFailure(KasnerLinError):
    pass


class StepLimitExceeded(KasnerLinError):
    pass


class ForwardParabolic(KasnerLinError):
    """Parabolic gauge only integrates toward the past."""


class NonFiniteState(KasnerLinError):
    pass


class MissingAccumulator(KasnerLinError):
    pass


class WrongGauge(KasnerLinError):
    pass


class InsufficientSpan(KasnerLinError):
    pass


class InsufficientDepth(KasnerLinError):
    pass


class ConfigError(KasnerLinError):
    pass
