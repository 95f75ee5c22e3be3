"""Exception hierarchy.

Every error class carries a stable ``exit_code`` so the command-line front end
can map failures to distinct process exit statuses.
"""


class ShadowScatterError(Exception):
    exit_code = 1


class DomainError(ShadowScatterError, ValueError):
    """Parameters outside the admissible region of the model."""

    exit_code = 2


class MomentDivergence(ShadowScatterError, ArithmeticError):
    """Requested moment does not exist (heavy inverse-gamma tail)."""

    exit_code = 3


class EvalError(ShadowScatterError, ArithmeticError):
    """Numerical evaluation did not converge within its budget."""

    exit_code = 4


class SeriesInapplicable(ShadowScatterError, ValueError):
    """Finite-series route requested outside its domain of validity."""

    exit_code = 5


class ClosedFormPole(ShadowScatterError, ArithmeticError):
    exit_code = 6


class FitDiverged(ShadowScatterError, RuntimeError):
    exit_code = 7


class MomentOutOfRange(ShadowScatterError, ValueError):
    exit_code = 8


class BinningError(ShadowScatterError, ValueError):
    exit_code = 9


class ParseError(ShadowScatterError, ValueError):
    exit_code = 10


class UnitError(ShadowScatterError, ValueError):
    exit_code = 11


class InsufficientLength(ShadowScatterError, ValueError):
    exit_code = 12


class LengthMismatch(ShadowScatterError, ValueError):
    exit_code = 13
