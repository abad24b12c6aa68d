"""Exception types shared by every module.

Each error carries a stable ``code`` string (used in the CLI's JSON error
object) and an ``exit_code``: 2 for input validation problems, 3 for
numerical failures.
"""

from __future__ import annotations


class MatprodError(Exception):
    code = "ERROR"
    exit_code = 3

    def __init__(self, message: str = "", **details):
        super().__init__(message or self.code)
        self.details = details

    def to_dict(self) -> dict:
        out = {"error": self.code, "message": str(self)}
        for key, value in self.details.items():
            out[key] = value if isinstance(value, (int, float, str, bool, type(None))) else repr(value)
        return out


class InputError(MatprodError, ValueError):
    code = "INVALID_INPUT"
    exit_code = 2


class NumericalError(MatprodError, ArithmeticError):
    code = "NUMERICAL_FAILURE"
    exit_code = 3


# validation errors
class NotSquare(InputError):
    code = "NOT_SQUARE"


class ZeroMatrix(InputError):
    code = "ZERO_MATRIX"


class NotStochastic(InputError):
    code = "NOT_STOCHASTIC"


class WordTooShort(InputError):
    code = "WORD_TOO_SHORT"


class BadCheckpoints(InputError):
    code = "BAD_CHECKPOINTS"


class NotTriangular(InputError):
    code = "NOT_TRIANGULAR"


class ZeroDiagonal(InputError):
    code = "ZERO_DIAGONAL"


class DimensionTooSmall(InputError):
    code = "DIMENSION_TOO_SMALL"


class ConfigError(InputError):
    code = "INVALID_CONFIG"


# numerical failures
class NoConvergence(NumericalError):
    code = "NO_CONVERGENCE"


class NotConverged(NumericalError):
    code = "NOT_CONVERGED"


class ProductVanished(NumericalError):
    code = "PRODUCT_VANISHED"


class EigenvalueNotOne(NumericalError):
    code = "EIGENVALUE_NOT_ONE"


class SearchExhausted(NumericalError):
    code = "SEARCH_EXHAUSTED"


class ZeroImage(NumericalError):
    code = "ZERO_IMAGE"


class NoFactorization(NumericalError):
    code = "NO_FACTORIZATION"


class CheckFailed(NumericalError):
    code = "CHECK_FAILED"


class HorizonTooShort(NumericalError):
    code = "HORIZON_TOO_SHORT"


class InconclusiveFiniteness(NumericalError):
    code = "INCONCLUSIVE_FINITENESS"
