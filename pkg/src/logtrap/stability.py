"""Linear stability of stationary Gaussons.

Two decoupled subsystems are analysed separately:

* the internal shape flow, the 6-dimensional dynamics of the independent
  entries (A11, A22, A12, B11, B22, B12), linearized at the stationary point;
* the centre-of-mass flow, the exact 4x4 linear system for (xi, pi), which is
  independent of the nonlinearity.

The shape Jacobian is computed by Richardson-checked central finite
differences (the flow is polynomial, so the central stencil is exact up to
rounding); a hand-derived analytic Jacobian is kept alongside as an
independent cross-check.  Classification thresholds on the largest real part
of the spectrum: both flows are Hamiltonian-like, so the generic verdicts are
Marginal (purely imaginary spectrum) or Unstable, never asymptotically
Stable.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from .core import BranchScan, Stability, StationaryPoint, TrapConfig
from .errors import EigenSolverFailure, SolverError
from .gausson_ode import _shape_rhs_2d

__all__ = [
    "Subsystem",
    "SpectrumReport",
    "shape_jacobian",
    "shape_jacobian_analytic",
    "com_matrix",
    "com_spectrum",
    "classify",
    "classify_scan",
    "write_spectra_csv",
    "STAB_TOL",
]

STAB_TOL = 1e-7


class Subsystem(enum.Enum):
    SHAPE = "Shape"
    CENTER_OF_MASS = "CenterOfMass"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: tuple[complex, ...]
    max_real_part: float
    classification: Stability
    subsystem: Subsystem


def _classify_spectrum(
    eigenvalues: np.ndarray, subsystem: Subsystem, stab_tol: float
) -> SpectrumReport:
    max_re = float(eigenvalues.real.max())
    if max_re > stab_tol:
        verdict = Stability.UNSTABLE
    elif max_re >= -stab_tol:
        verdict = Stability.MARGINAL
    else:
        verdict = Stability.STABLE
    ordered = sorted((complex(z) for z in eigenvalues), key=lambda z: (z.real, z.imag))
    return SpectrumReport(
        eigenvalues=tuple(ordered),
        max_real_part=max_re,
        classification=verdict,
        subsystem=subsystem,
    )


def _shape_flow(y: np.ndarray, config: TrapConfig) -> np.ndarray:
    return np.array(
        _shape_rhs_2d(
            y[0], y[1], y[2], y[3], y[4], y[5],
            config.Omega, config.omega1**2, config.omega2**2, config.b,
        )
    )


def _fd_jacobian(y0: np.ndarray, config: TrapConfig, h: float) -> np.ndarray:
    jac = np.empty((6, 6))
    for k in range(6):
        e = np.zeros(6)
        e[k] = h
        jac[:, k] = (_shape_flow(y0 + e, config) - _shape_flow(y0 - e, config)) / (2.0 * h)
    return jac


def _embed(point: StationaryPoint) -> np.ndarray:
    return np.array([point.alpha1, point.alpha2, 0.0, 0.0, 0.0, point.beta])


def shape_jacobian(
    point: StationaryPoint, config: TrapConfig, h: float = 1e-5
) -> np.ndarray:
    """6x6 Jacobian of the shape flow at a stationary point.

    Central finite differences at steps h and h/2, combined by Richardson
    extrapolation; the two stencils must agree (the flow is quadratic, so
    any disagreement beyond rounding signals a broken evaluation).
    """
    if point.residual > 1e-6:
        raise ValueError(
            f"point residual {point.residual:.3e} too large for a stationary-point Jacobian"
        )
    y0 = _embed(point)
    coarse = _fd_jacobian(y0, config, h)
    fine = _fd_jacobian(y0, config, 0.5 * h)
    extrapolated = (4.0 * fine - coarse) / 3.0
    if np.abs(extrapolated - fine).max() > 1e-6:
        raise SolverError(
            "finite-difference Jacobian failed its Richardson consistency check"
        )
    return extrapolated


def shape_jacobian_analytic(point: StationaryPoint, config: TrapConfig) -> np.ndarray:
    """Hand-derived Jacobian of the shape flow; cross-check for shape_jacobian.

    Valid at any (A, B) with A = Diag(a11, a22) + a12 off-diagonal etc.; here
    evaluated at the stationary embedding (a12 = b11 = b22 = 0).
    """
    a11, a22, a12, b11, b22, b12 = _embed(point)
    Om, b = config.Omega, config.b
    return np.array(
        [
            [2 * b11, 0, 2 * b12 + 2 * Om, 2 * a11, 0, 2 * a12],
            [0, 2 * b22, 2 * b12 - 2 * Om, 0, 2 * a22, 2 * a12],
            [b12 - Om, b12 + Om, b11 + b22, a12, a12, a11 + a22],
            [-2 * a11 + 2 * b, 0, -2 * a12, 2 * b11, 0, 2 * b12 + 2 * Om],
            [0, -2 * a22 + 2 * b, -2 * a12, 0, 2 * b22, 2 * b12 - 2 * Om],
            [-a12, -a12, -(a11 + a22) + 2 * b, b12 - Om, b12 + Om, b11 + b22],
        ]
    )


def com_matrix(config: TrapConfig) -> np.ndarray:
    """Exact linear system for (xi1, xi2, pi1, pi2)."""
    if config.dim != 2:
        raise ValueError("centre-of-mass analysis is two-dimensional only")
    w = config.omega_matrix
    v = config.vmat
    top = np.hstack([-w, np.eye(2)])
    bottom = np.hstack([-v, -w])
    return np.vstack([top, bottom])


def _eigvals(matrix: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.eigvals(matrix)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverFailure(f"eigenvalue computation failed: {exc}") from exc


def com_spectrum(config: TrapConfig, stab_tol: float = STAB_TOL) -> SpectrumReport:
    """Spectrum and verdict for the centre-of-mass motion (independent of b)."""
    return _classify_spectrum(
        _eigvals(com_matrix(config)), Subsystem.CENTER_OF_MASS, stab_tol
    )


def classify(
    point: StationaryPoint, config: TrapConfig, stab_tol: float = STAB_TOL
) -> SpectrumReport:
    """Spectrum and verdict for the internal shape flow at one point."""
    return _classify_spectrum(
        _eigvals(shape_jacobian(point, config)), Subsystem.SHAPE, stab_tol
    )


def classify_scan(scan: BranchScan, stab_tol: float = STAB_TOL) -> BranchScan:
    """Copy of a branch scan with every point's stability field filled in."""
    classified = tuple(
        replace(
            p,
            stability=classify(
                p, scan.config.with_rotation(p.Omega), stab_tol
            ).classification,
        )
        for p in scan.points
    )
    return BranchScan(
        config=scan.config,
        omega_grid=scan.omega_grid,
        points=classified,
        multiplicity=scan.multiplicity,
        folds=scan.folds,
    )


def write_spectra_csv(
    entries: Iterable[tuple[float, int | None, SpectrumReport]], path: str | Path
) -> None:
    """Rows of (Omega, branch_id, report); branch_id is blank for the
    centre-of-mass subsystem, as are the eigenvalue columns beyond its four."""
    lines = ["Omega,branch_id,subsystem,"
             + ",".join(f"re_lambda_{k},im_lambda_{k}" for k in range(1, 7))
             + ",classification"]
    for omega, branch_id, report in entries:
        cells = [f"{omega:.16e}", "" if branch_id is None else str(branch_id),
                 str(report.subsystem)]
        eig = list(report.eigenvalues)
        for k in range(6):
            if k < len(eig):
                cells.append(f"{eig[k].real:.16e}")
                cells.append(f"{eig[k].imag:.16e}")
            else:
                cells.extend(["", ""])
        cells.append(str(report.classification))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")
