"""Exception and warning types raised across the package."""


class SplcmError(Exception):
    """Base class for all errors raised by sparse_lcm."""


class NumericalError(SplcmError):
    """A numerical routine failed (CLI exit code 1)."""


class NonTriangularLength(SplcmError, ValueError):
    pass


class LengthMismatch(SplcmError, ValueError):
    pass


class DimensionMismatch(SplcmError, ValueError):
    pass


class DimensionTooLarge(SplcmError, ValueError):
    pass


class NotPositiveDefinite(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class MaxIterations(NumericalError):
    pass


class Infeasible(NumericalError):
    pass


class Unbounded(NumericalError):
    pass


class SigmaUpdateFailure(NumericalError):
    pass


class AllCellsFailed(NumericalError):
    pass


class ConditioningFailure(NumericalError):
    pass


class HubDivisibility(SplcmError, ValueError):
    pass


class ClassTooSmall(SplcmError, ValueError):
    pass


class NonPositiveVariance(SplcmError, ValueError):
    pass


class InvalidCorrelation(SplcmError, ValueError):
    pass


class ParseError(SplcmError, ValueError):
    pass


class NonConvergenceWarning(UserWarning):
    """ADMM stopped at ``max_iter`` with residuals above tolerance."""


class NotPositiveDefiniteWarning(UserWarning):
    """A plug-in precision matrix is not positive definite."""
