"""Exception types raised by bsinfer."""


class RankDeficientError(ValueError):
    """The design matrix does not have full column rank."""


class DegenerateDataError(ValueError):
    """The response lies in the column space of the design; the likelihood is unbounded."""


class ConvergenceError(RuntimeError):
    """An optimisation or resampling step failed to converge."""


class BartlettFactorError(ArithmeticError):
    """The Bartlett factor ``c = 1 + B/q`` is not positive."""
