"""Exception types raised across the package."""


class ConfigurationError(ValueError):
    """Invalid parameters or inconsistent configuration."""


class ShapeError(ValueError):
    """Array or object dimensions do not match."""


class TopologyError(RuntimeError):
    """Mesh connectivity is not what the operation requires."""


class StabilityBoundError(ValueError):
    """A frequency exceeds the bound beyond which f+ and f- cancel to roundoff."""


class ConditioningError(RuntimeError):
    """A local least-squares fit is too ill-conditioned to trust."""


class LinearSolveError(RuntimeError):
    """A sparse or dense linear solve failed."""


class SolverDivergenceError(RuntimeError):
    """Newton iteration did not reach its tolerance.

    The residual history is kept on ``history`` for diagnostics.
    """

    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)


class ConvergenceError(RuntimeError):
    """An iterative reconstruction broke down (e.g. the objective increased)."""

    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)
