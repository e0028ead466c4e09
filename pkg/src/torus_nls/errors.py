"""Exception types shared across the package."""


class TorusNLSError(Exception):
    """Base class for all package errors."""

    code = "error"


class InvalidInputError(TorusNLSError, ValueError):
    code = "invalid_input"


class BudgetExceededError(TorusNLSError):
    """Lattice enumeration would exceed the configured work cap."""

    code = "budget_exceeded"


class BlowUpError(TorusNLSError):
    """A non-finite value appeared during time stepping.

    ``partial`` holds the trajectory recorded up to the last finite sample.
    """

    code = "blow_up"

    def __init__(self, message, step=None, t=None, partial=None):
        super().__init__(message)
        self.step = step
        self.t = t
        self.partial = partial


class PlanError(TorusNLSError):
    def __init__(self, message, code="invalid_plan"):
        super().__init__(message)
        self.code = code
