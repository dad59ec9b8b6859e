"""Exception types shared across the package.

The CLI maps these onto exit codes: usage and format errors exit 1,
while mathematical rejections of well-formed inputs (residual above
tolerance, input not positive semidefinite, empty solution set,
factorization schedule exhausted) exit 2.
"""
from __future__ import annotations


class TrigfactorError(Exception):
    """Base class for all package-specific errors."""


class DomainError(TrigfactorError):
    """Evaluation point off the unit torus (or other domain violation)."""


class NotPsdError(TrigfactorError):
    """An object required to be positive semidefinite is not.

    Attributes
    ----------
    min_eigenvalue : float
        Most negative eigenvalue encountered.
    where : str or None
        Optional description of the location (e.g. a grid point).
    """

    def __init__(self, message, min_eigenvalue=None, where=None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue
        self.where = where


class ConvergenceError(TrigfactorError):
    """An iterative solver failed to converge.

    Attributes
    ----------
    last_gap : float or None
        Size of the last iteration step or residual gap.
    iterations : int or None
        Number of iterations performed.
    """

    def __init__(self, message, last_gap=None, iterations=None, trace_log=None):
        super().__init__(message)
        self.last_gap = last_gap
        self.iterations = iterations
        self.trace_log = trace_log


class FactorizationError(TrigfactorError):
    """A factorization routine exhausted its schedules without acceptance.

    Attributes
    ----------
    best_residual : float or None
        Smallest residual seen across all attempts.
    stage : str or None
        Pipeline stage tag (for multi-stage drivers).
    """

    def __init__(self, message, best_residual=None, stage=None):
        super().__init__(message)
        self.best_residual = best_residual
        self.stage = stage


class EmptySetError(TrigfactorError):
    """A feasibility set turned out to be empty.

    Attributes
    ----------
    where : object
        Location at which emptiness was detected (e.g. a frequency).
    """

    def __init__(self, message, where=None):
        super().__init__(message)
        self.where = where
