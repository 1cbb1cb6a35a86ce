"""Exception hierarchy shared by the numerical modules and the CLI."""


class GPTLabError(Exception):
    """Base class for all library errors."""


class SolverError(GPTLabError):
    """A forward or linear solve failed.

    Attributes
    ----------
    mode : int or None
        Harmonic order of the failing solve, when it is a per-mode solve.
    residual : float or None
        Last residual (or condition estimate) seen before giving up.
    """

    def __init__(self, message, mode=None, residual=None):
        super().__init__(message)
        self.mode = mode
        self.residual = residual


class ConvergenceError(SolverError):
    """An iterative method hit its iteration cap or diverged."""


class InadmissibleDataError(GPTLabError):
    """Input data lies outside the admissible class (bounds, model class, ...)."""
