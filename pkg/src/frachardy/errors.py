"""Exception hierarchy shared by all modules."""


class FracHardyError(Exception):
    """Base class for all library errors."""


class ParameterError(FracHardyError, ValueError):
    """A parameter lies outside its admissible domain."""


class ShapeError(FracHardyError, ValueError):
    """Sample arrays do not match the grid they are paired with."""


class DomainError(FracHardyError, ValueError):
    """A function was evaluated outside the set where it is finite."""


class RegimeError(FracHardyError):
    """The requested construction does not apply for these parameters."""


class PreconditionError(FracHardyError):
    """Inputs violate a documented precondition."""


class SolverError(FracHardyError):
    """A nonlinear solve failed for reasons other than blow-up.

    ``index`` is the time-step (or iteration) at which the failure happened.
    """

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class ConvergenceError(SolverError):
    """An iterative method stagnated above its tolerance."""
