"""Exception hierarchy shared by all circfluct modules."""


class CircFluctError(Exception):
    """Base class for every error raised by this package."""


class GridError(CircFluctError, ValueError):
    """Invalid time grid, or a time that is not an exact grid point."""


class OrderingError(CircFluctError, ValueError):
    """Two times were supplied in the wrong order."""


class BudgetExceededError(CircFluctError, RuntimeError):
    """An enumeration would visit more elements than the configured budget."""

    def __init__(self, required, budget, what="enumeration"):
        self.required = required
        self.budget = budget
        super().__init__(
            f"{what} needs {required} iterations, budget is {budget}; "
            "raise the budget or use the spectral route"
        )


class DegenerateCaseError(CircFluctError, ValueError):
    """A power below 2 was requested where only p >= 2 fluctuates.

    For p = 0 the statistic is identically zero and for p = 1 it equals
    b_0(t) for every n, so neither has a nontrivial limit.
    """


class PairingError(CircFluctError, ValueError):
    """Estimator inputs do not come from the same replicas."""


class NotPositiveSemidefiniteError(CircFluctError, ArithmeticError):
    """A Gram matrix failed the PSD factorization beyond tolerance."""

    def __init__(self, message, pivot=None, min_eigenvalue=None):
        self.pivot = pivot
        self.min_eigenvalue = min_eigenvalue
        super().__init__(message)


class ConfigError(CircFluctError, ValueError):
    """Experiment configuration could not be parsed or validated."""
