"""Exception hierarchy shared by every module of the package."""


class TractorCurvesError(Exception):
    """Base class for all package errors."""


class SingularMetric(TractorCurvesError):
    pass


class OutOfChart(TractorCurvesError):
    pass


class StepTooLarge(TractorCurvesError):
    pass


class DimensionTooLow(TractorCurvesError):
    pass


class OnZeroLocus(TractorCurvesError):
    """The scale vanishes at the requested point, so the singular metric is undefined."""


class NullVelocity(TractorCurvesError):
    pass


class NonPositiveFactor(TractorCurvesError):
    pass


class BasepointMismatch(TractorCurvesError):
    pass


class RankOverflow(TractorCurvesError):
    pass


class RankMismatch(TractorCurvesError):
    pass


class IntegratorFailure(TractorCurvesError):
    pass


class InsufficientSamples(TractorCurvesError):
    pass


class InfeasibleAtBoundary(TractorCurvesError):
    """No acceleration makes I^Sigma vanish: the velocity is not normal to the zero locus."""


class NotAlmostEinstein(TractorCurvesError):
    pass


class NoBoundaryHit(TractorCurvesError):
    pass


class UnknownModel(TractorCurvesError):
    pass


class ConfigError(TractorCurvesError):
    pass


class CheckFailure(TractorCurvesError):
    pass
