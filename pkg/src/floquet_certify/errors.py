class FloquetError(Exception):
    """Base class for errors raised by floquet_certify."""


class InputError(FloquetError, ValueError):
    """Malformed or semantically invalid input."""


class NumericalFailure(FloquetError, ArithmeticError):
    """A computation did not converge or produced non-finite values."""
