"""Exception hierarchy. Validation errors subclass ``ValueError``."""


class HirefError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(HirefError, ValueError):
    """Input failed a precondition."""


class DatasetError(ValidationError):
    pass


class DimensionError(ValidationError):
    pass


class InvalidSubset(ValidationError):
    pass


class RankError(ValidationError):
    pass


class ShapeError(ValidationError):
    pass


class TooLargeError(ValidationError):
    pass


class CapacityError(ValidationError):
    pass


class SizeError(ValidationError):
    pass


class ScheduleError(ValidationError):
    pass


class SpecError(ValidationError):
    pass


class UsageError(ValidationError):
    pass


class NumericalError(HirefError, ArithmeticError):
    """A non-finite value reached a solver."""


class Infeasible(HirefError):
    """No rank schedule satisfies the constraints.

    ``constraint`` names the binding constraint.
    """

    def __init__(self, message, constraint=None):
        super().__init__(message)
        self.constraint = constraint
