"""Exception types shared across the package."""


class CombDriveError(Exception):
    """Base class for all package errors."""


class DomainError(CombDriveError, ValueError):
    """State or parameters outside the model's domain (e.g. |x| >= 1, V0 >= V*)."""


class RangeError(CombDriveError, ValueError):
    """Argument outside the open range an operation is defined on."""


class AdmissibilityError(CombDriveError, ValueError):
    """(m, p) violates 1 <= p <= nu_m."""


class ConvergenceError(CombDriveError, RuntimeError):
    """An iterative method ran out of iterations or refinements."""


class IntegrationError(CombDriveError, RuntimeError):
    """The ODE integrator failed (e.g. step size underflow)."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class PeriodicityError(CombDriveError, ValueError):
    """Base solution does not return to its initial state over the requested span."""
