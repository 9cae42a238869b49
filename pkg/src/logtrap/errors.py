"""Exception hierarchy.

``ValueError`` is reserved for bad user input (malformed configuration,
out-of-range parameters).  Everything that goes wrong *during* a computation
derives from :class:`SolverError` so callers can distinguish "you asked for
something ill-posed" from "the algorithm failed on a well-posed request".
"""

from __future__ import annotations


class LogTrapError(Exception):
    """Base class for all package-specific errors."""


class SolverError(LogTrapError):
    """A numerical routine failed to produce a trustworthy result."""


class PositiveDefinitenessLost(SolverError):
    """The width matrix stopped being positive definite during integration."""

    def __init__(self, t: float, min_eig: float | None = None):
        self.t = float(t)
        self.min_eig = min_eig
        detail = f" (min eigenvalue {min_eig:.3e})" if min_eig is not None else ""
        super().__init__(f"width matrix lost positive definiteness at t={t:.6g}{detail}")


class StepUnderflow(SolverError):
    """The adaptive integrator could not proceed at the requested tolerance."""


class NonFinite(SolverError):
    """NaN or Inf appeared in the evolving field."""

    def __init__(self, t: float):
        self.t = float(t)
        super().__init__(f"non-finite values in field at t={t:.6g}")


class OutsideStabilityRegion(SolverError):
    """A closed-form branch was requested at a rotation rate where it does not exist."""


class BranchAmbiguity(SolverError):
    """Branch linking across a parameter step could not be resolved uniquely."""


class DegenerateMoments(SolverError):
    """Second moments of a field are singular; no Gaussian fit is possible."""


class EigenSolverFailure(SolverError):
    """The dense eigenvalue solver did not converge."""
