"""Exception hierarchy shared by every module."""


class QHCError(Exception):
    """Base class for all library errors."""


class InputError(QHCError, ValueError):
    """Malformed or dimensionally inconsistent input."""


class PreconditionError(QHCError):
    """An operation was called outside the hypotheses it requires."""


class NumericalError(QHCError, ArithmeticError):
    """An iterative method hit its iteration cap or broke down."""


class InternalContradiction(QHCError):
    """A result guaranteed by theory failed to materialize.

    Raised when, e.g., a segment witness that must exist is not found.  This
    points at a tolerance problem or an invalid precondition, never at a
    legitimate negative answer.
    """
