"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    """Input that violates a documented precondition (shape, index, label or hyperparameter)."""


class NumericalFailureError(ArithmeticError):
    """A solver produced non-finite values.

    Attributes
    ----------
    iteration : int
        Iteration index (1-based) at which the failure was detected.
    """

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class InfeasibleError(ValueError):
    """An equality-constrained subproblem has no feasible point."""
