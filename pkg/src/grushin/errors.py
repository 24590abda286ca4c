"""Exception types raised by the toolkit."""


class DomainError(ValueError):
    """A point or radius lies outside the domain where a quantity is defined."""


class PreconditionError(ValueError):
    """An operation was called on inputs that violate its hypotheses."""


class ResonanceError(RuntimeError):
    """The discrete Helmholtz system is numerically singular."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class ConvergenceError(RuntimeError):
    """An iterative or extrapolation procedure failed to settle."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history or [])
