"""Exception hierarchy for mpspline.

Every error raised on purpose by the package derives from :class:`MPSplineError`
and, where it makes sense, also from ``ValueError`` so that callers catching the
builtin keep working.
"""


class MPSplineError(Exception):
    """Base class for all package errors."""


class InvalidKnotsError(MPSplineError, ValueError):
    pass


class InvalidOrderError(MPSplineError, ValueError):
    pass


class OutOfDomainError(MPSplineError, ValueError):
    pass


class DerivativeOrderError(MPSplineError, ValueError):
    pass


class PenaltyOrderError(MPSplineError, ValueError):
    pass


class InsufficientResolutionError(MPSplineError, ValueError):
    """A basis function overlaps fewer than two grid points."""


class GridMismatchError(MPSplineError, ValueError):
    pass


class DatasetError(MPSplineError, ValueError):
    """Malformed or inconsistent input data."""


class ParseError(DatasetError):
    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        parts = [str(source)] if source is not None else []
        if line is not None:
            parts.append(f"line {line}")
        super().__init__(f"{', '.join(parts)}: {message}" if parts else message)


class EmptyInputError(DatasetError):
    pass


class RowCountMismatchError(DatasetError):
    pass


class DegenerateScaleError(MPSplineError, ArithmeticError):
    """Residual scale estimate collapsed to zero."""


class SingularSystemError(MPSplineError, ArithmeticError):
    pass


class DivergenceError(MPSplineError, ArithmeticError):
    """IRLS produced a non-finite objective."""


class OversmoothingGuardError(MPSplineError, ArithmeticError):
    """Criterion undefined because the effective degrees of freedom are too large."""


class SelectionFailureError(MPSplineError, RuntimeError):
    pass


class HarnessError(MPSplineError, RuntimeError):
    """Too many Monte Carlo replications failed."""


class ConfigError(MPSplineError, ValueError):
    pass
