"""Exception hierarchy shared by every algctl module."""


class AlgctlError(Exception):
    """Base class for all library errors."""


class DomainError(AlgctlError, ValueError):
    """A base point lies outside the chart's domain box or has the wrong size."""


class InvalidChartError(AlgctlError, ValueError):
    """Chart data violate a structural requirement (e.g. antisymmetry)."""


class IntegrationError(AlgctlError):
    """Step-size underflow. ``partial`` holds the trajectory computed so far."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class DivergenceError(IntegrationError):
    """The state became non-finite. ``last_state`` is the last finite state."""

    def __init__(self, message, partial=None, last_state=None):
        super().__init__(message, partial)
        self.last_state = last_state


class NoSolutionError(AlgctlError):
    """The stationarity equation could not be solved; carries the best iterate."""

    def __init__(self, message, best_u=None, grad_norm=float("inf")):
        super().__init__(message)
        self.best_u = best_u
        self.grad_norm = grad_norm


class RegularityError(AlgctlError):
    """The control Hessian is singular or indefinite where it must be regular."""


class UnsupportedModelError(AlgctlError):
    """An operation was asked of a model outside its supported class."""


class NoConvergenceError(AlgctlError):
    """Shooting exhausted every restart. Carries the best candidate found."""

    def __init__(self, message, best_theta=None, best_residual=float("inf"), history=None):
        super().__init__(message)
        self.best_theta = best_theta
        self.best_residual = best_residual
        self.history = history or []
