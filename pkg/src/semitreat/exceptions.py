"""Exception hierarchy.

Every error carries a short ``code`` string that the command line tool
reports verbatim, so the names are part of the public interface.
"""


class SemitreatError(Exception):
    """Base class for all errors raised by this package."""

    code = "SemitreatError"


class InputError(SemitreatError, ValueError):
    """Invalid user input (exit status 2 on the command line)."""

    code = "InputError"


class EstimationError(SemitreatError, ArithmeticError):
    """A numerical procedure could not produce an estimate (exit status 3)."""

    code = "EstimationError"


class EmptyArmError(InputError):
    code = "EmptyArm"


class NonFiniteError(InputError):
    code = "NonFinite"


class BadIndicatorError(InputError):
    code = "BadIndicator"


class BadQuantileError(InputError):
    code = "BadQuantile"


class BadTrimError(InputError):
    code = "BadTrim"


class BadParamsError(InputError):
    code = "BadParams"


class BadLawError(InputError):
    code = "BadLaw"


class TooFewPointsError(InputError):
    code = "TooFewPoints"


class MissingVarianceError(InputError):
    code = "MissingVariance"


class DegenerateScaleError(EstimationError):
    code = "DegenerateScale"


class DegenerateDensityError(EstimationError):
    code = "DegenerateDensity"


class DegenerateInfoError(EstimationError):
    code = "DegenerateInfo"


class AllTruncatedError(EstimationError):
    code = "AllTruncated"


class NoBracketError(EstimationError):
    code = "NoBracket"


class NoSolutionError(EstimationError):
    code = "NoSolution"


class ResampleFailureError(EstimationError):
    code = "ResampleFailure"


class NonIntegrableError(EstimationError):
    code = "NonIntegrable"
