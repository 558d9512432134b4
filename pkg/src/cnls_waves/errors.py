"""Exception types shared across the package."""


class QuadratureError(RuntimeError):
    """Successive quadrature refinements failed to agree to tolerance."""


class ConvergenceError(RuntimeError):
    """Newton iteration or a localization loop did not converge."""


class SingularJacobianError(ConvergenceError):
    """The assembled Jacobian is numerically singular.

    Usually signals a bifurcation point or an ill-posed condition count.
    """


class StallError(ConvergenceError):
    """Continuation step size fell below the minimum without convergence."""


class DegenerateProjectionError(ValueError):
    """A projection boundary matrix is degenerate (decay rate hit zero)."""
