"""Exception types raised across the package."""


class HardyLabError(Exception):
    """Base class for all package errors."""


class InvalidParameter(HardyLabError, ValueError):
    pass


class NonPositiveExpression(HardyLabError, ValueError):
    pass


class Inconclusive(HardyLabError):
    """A numeric classification could not be decided within its budget.

    The partial evidence is kept on ``report`` so callers can still show it.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class QuadratureFailure(HardyLabError, ArithmeticError):
    pass


class ClassMismatch(HardyLabError, ValueError):
    pass


class NonPositiveT(HardyLabError, ValueError):
    pass


class ToleranceExceeded(HardyLabError):
    def __init__(self, message, worst=None):
        super().__init__(message)
        self.worst = worst


class FitRejected(HardyLabError):
    def __init__(self, message, fit=None):
        super().__init__(message)
        self.fit = fit


class HypothesisNotMet(HardyLabError):
    pass


class ExtrapolationRequired(HardyLabError):
    pass


class MeshMismatch(HardyLabError, ValueError):
    pass


class ProfileTooCoarse(HardyLabError):
    pass


class ZeroDenominator(HardyLabError, ZeroDivisionError):
    pass


class NoConvergence(HardyLabError):
    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class IndefiniteH(HardyLabError):
    pass


class InvalidBracket(HardyLabError, ValueError):
    pass
