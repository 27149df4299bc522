"""Exception types shared across the engines."""


class ExchangeLabError(Exception):
    """Base class for computation errors (CLI exit code 1)."""


class InvalidSpecError(ExchangeLabError, ValueError):
    pass


class UnsupportedRateError(ExchangeLabError, ValueError):
    pass


class InvalidAllocationError(ExchangeLabError, ValueError):
    pass


class TooLargeError(ExchangeLabError):
    pass


class DegenerateDistributionError(ExchangeLabError, ValueError):
    pass


class Phase1TimeoutError(ExchangeLabError):
    """Mean debt never reached the bank limit before ``t_max``."""

    def __init__(self, message, final_debt=None):
        super().__init__(message)
        self.final_debt = final_debt


class InstabilityError(ExchangeLabError):
    pass


class NoEquilibriumError(ExchangeLabError):
    pass


class AmbiguousEquilibriumError(ExchangeLabError):
    def __init__(self, message, roots=()):
        super().__init__(message)
        self.roots = tuple(roots)


class NonNormalizableError(ExchangeLabError):
    pass


class NotInClassGWarning(RuntimeWarning):
    """Mean debt decreased during Phase I."""


class TruncationWarning(RuntimeWarning):
    """Boundary mass above the truncation tolerance."""
