"""Exception and warning types raised across the package."""


class RccaError(Exception):
    """Base class for all package errors."""

    code = "rcca_error"


class DimensionError(RccaError, ValueError):
    code = "dimension"


class NumericalError(RccaError, ArithmeticError):
    code = "numerical"


class RegimeError(RccaError, ValueError):
    code = "regime"


class IllConditionedError(NumericalError):
    code = "ill_conditioned"


class ParameterError(RccaError, ValueError):
    code = "parameter"


class DegenerateError(RccaError, ValueError):
    code = "degenerate"


class ConvergenceError(NumericalError):
    code = "convergence"


class ContourError(NumericalError):
    code = "contour"


class SingularityError(NumericalError):
    code = "singularity"


class InternalError(RccaError, RuntimeError):
    code = "internal"


class DataError(RccaError, ValueError):
    code = "data"


class BoundaryWarning(UserWarning):
    """Dimension ratios sit close to a regime boundary of the split test."""
