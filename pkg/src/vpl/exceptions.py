"""Exception and warning types raised by vpl."""


class DomainError(ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class ContractViolation(ValueError):
    """Inputs break a documented precondition (shape, finiteness, bounds)."""


class MonotonicityError(RuntimeError):
    """The ascent iteration lowered the energy; indicates a solver bug."""


class CFLError(ValueError):
    """A time step exceeds the advective stability bound."""


class NonFiniteFieldError(FloatingPointError):
    """A time integration produced NaN or inf values."""

    def __init__(self, message, dump_path=None):
        super().__init__(message)
        self.dump_path = dump_path


class ConvergenceWarning(UserWarning):
    """Iteration stopped at ``max_iter`` before meeting its tolerance."""
