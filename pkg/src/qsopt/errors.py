"""Exception types raised across the package.

Every error derives from ``QsoptError`` (itself a ``ValueError``) and carries
an ``exit_code`` used by the command-line interface:

* 2 for bad input or configuration,
* 3 for degenerate geometry or a degenerate model,
* 4 for numerical failure.
"""


class QsoptError(ValueError):
    exit_code = 2


class InvalidInputError(QsoptError):
    exit_code = 2


class InvalidDimensionError(InvalidInputError):
    pass


class InvalidTargetError(InvalidInputError):
    pass


class InvalidGridError(InvalidInputError):
    pass


class DegeneratePriorError(InvalidInputError):
    pass


class DegenerateSubspaceError(QsoptError):
    """The target basis state and the reflection axis are (anti)parallel."""

    exit_code = 3


class UndefinedAngleError(QsoptError):
    """The state has no component in the rotation plane, so its angle is undefined."""

    exit_code = 3


class DegenerateModelError(QsoptError):
    """A closed-form expression hits a vanishing denominator."""

    exit_code = 3


class NumericalError(QsoptError):
    exit_code = 4


class SingularSystemError(NumericalError):
    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class NonquadraticRegimeError(NumericalError):
    pass
