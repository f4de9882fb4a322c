"""Exception hierarchy shared across sbm_lab."""


class SBMLabError(Exception):
    """Base class for all package errors."""


class NegativeRate(SBMLabError, ValueError):
    pass


class InvalidParams(SBMLabError, ValueError):
    pass


class SizeMismatch(SBMLabError, ValueError):
    pass


class LabelOutOfRange(SBMLabError, ValueError):
    pass


class BadLength(SBMLabError, ValueError):
    pass


class TooLarge(SBMLabError, ValueError):
    pass


class InsufficientCandidates(SBMLabError, RuntimeError):
    pass


class EmptyInterval(SBMLabError, ValueError):
    pass


class NumericalUnderflow(SBMLabError, FloatingPointError):
    pass


class BudgetExceeded(SBMLabError, RuntimeError):
    """Search ran out of budget. The best labeling found so far is attached."""

    def __init__(self, message, best=None, objective=None):
        super().__init__(message)
        self.best = best
        self.objective = objective


class DegenerateGap(SBMLabError, ValueError):
    pass


class RangeError(SBMLabError, ValueError):
    pass


class ConfigError(SBMLabError, ValueError):
    pass


class SchemaMismatch(SBMLabError, ValueError):
    pass
