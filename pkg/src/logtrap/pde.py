"""Split-step spectral solver for the logarithmic Schrödinger equation.

This is the independent cross-check for the Gaussian-ansatz machinery: it
never touches the ansatz equations.  The PDE is integrated in the LAB frame,

    i dpsi/dt = [ -Laplacian/2 + r.V(t).r/2 - b log|psi|^2 ] psi,
    V(t) = R(Omega t) Diag(omega1^2, omega2^2) R(Omega t)^T,

with a Strang split whose substeps are all exact: the kinetic half-steps are
diagonal in momentum space, and the potential+nonlinearity step is a pure
phase (|psi| is invariant under it, so the logarithm's argument does not
change during the substep).  The time-dependent potential is evaluated at the
substep midpoint, preserving second order.  Rotating-frame quantities are
recovered in post-processing by undoing the accumulated rotation angle.

The logarithm is floored at ``log_epsilon`` to avoid -inf phases in the far
tails; the floor is a numerical device, never reached in the trap interior
for the states of interest.
"""

from __future__ import annotations

import enum
import io
import math
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .core import GaussonState, TrapConfig, evaluate_wavefunction, rotation_matrix
from .errors import DegenerateMoments, NonFinite

__all__ = [
    "Grid2D",
    "Field2D",
    "Frame",
    "PdeSettings",
    "PdeTrajectory",
    "GaussianFit",
    "step",
    "evolve",
    "energy_spectral",
    "fit_gaussian",
    "fidelity",
    "gausson_field",
    "strang_order",
    "write_field",
    "read_field",
    "write_pde_csv",
]


@dataclass(frozen=True)
class Grid2D:
    """Uniform periodic n×n grid on [-L, L)²; n must be a power of two."""

    n: int = 256
    L: float = 12.0

    def __post_init__(self) -> None:
        if self.n < 2 or (self.n & (self.n - 1)) != 0:
            raise ValueError(f"n must be a power of two >= 2, got {self.n}")
        if not self.L > 0.0:
            raise ValueError(f"L must be positive, got {self.L}")

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.n

    @cached_property
    def xs(self) -> np.ndarray:
        xs = -self.L + self.dx * np.arange(self.n)
        xs.setflags(write=False)
        return xs

    @cached_property
    def meshes(self) -> tuple[np.ndarray, np.ndarray]:
        x, y = np.meshgrid(self.xs, self.xs, indexing="ij")
        x.setflags(write=False)
        y.setflags(write=False)
        return x, y

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray]:
        k = 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)
        kx, ky = np.meshgrid(k, k, indexing="ij")
        kx.setflags(write=False)
        ky.setflags(write=False)
        return kx, ky

    @cached_property
    def k_squared(self) -> np.ndarray:
        kx, ky = self.wavenumbers
        k2 = kx**2 + ky**2
        k2.setflags(write=False)
        return k2


@dataclass(frozen=True)
class Field2D:
    """Complex amplitudes on a grid at one instant."""

    values: np.ndarray
    grid: Grid2D
    t: float = 0.0

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.grid.n, self.grid.n):
            raise ValueError(
                f"values shape {v.shape} does not match grid n={self.grid.n}"
            )
        object.__setattr__(self, "values", v)

    def norm(self) -> float:
        """Discrete integral of |psi|²."""
        return float((np.abs(self.values) ** 2).sum() * self.grid.dx**2)


class Frame(enum.Enum):
    LAB = "lab"
    ROTATING = "rotating"


@dataclass(frozen=True)
class PdeSettings:
    """Time stepping and reporting controls.

    ``frame`` selects the frame in which moment diagnostics (centre,
    covariance) are reported; the equation itself is always integrated in
    the lab frame.  ``store_every`` > 0 keeps every so-many-th diagnostic
    sample's full field in memory (0 keeps only the first and last).
    """

    dt: float = 1e-3
    t_end: float = 1.0
    log_epsilon: float = 1e-30
    frame: Frame = Frame.LAB
    sample_every: int = 10
    store_every: int = 0

    def __post_init__(self) -> None:
        if not self.dt > 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.t_end > 0.0:
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if self.log_epsilon < 0.0:
            raise ValueError(f"log_epsilon must be >= 0, got {self.log_epsilon}")
        if self.sample_every < 1:
            raise ValueError("sample_every must be >= 1")
        if self.store_every < 0:
            raise ValueError("store_every must be >= 0")


def _potential_grid(grid: Grid2D, config: TrapConfig, t: float) -> np.ndarray:
    """½ r·V(t)·r on the grid, with V rotated to the lab frame at time t."""
    x, y = grid.meshes
    r = rotation_matrix(config.Omega * t)
    v = r @ np.diag([config.omega1**2, config.omega2**2]) @ r.T
    return 0.5 * (v[0, 0] * x**2 + 2.0 * v[0, 1] * x * y + v[1, 1] * y**2)


def _check_finite(values: np.ndarray, t: float) -> None:
    if not np.isfinite(values).all():
        raise NonFinite(t)


def _strang_step(
    values: np.ndarray,
    t: float,
    grid: Grid2D,
    config: TrapConfig,
    settings: PdeSettings,
    half_kinetic: np.ndarray,
) -> np.ndarray:
    dt = settings.dt
    out = np.fft.ifft2(half_kinetic * np.fft.fft2(values))
    _check_finite(out, t)
    phase = _potential_grid(grid, config, t + 0.5 * dt) - config.b * np.log(
        np.maximum(np.abs(out) ** 2, settings.log_epsilon)
    )
    out = out * np.exp(-1j * dt * phase)
    _check_finite(out, t)
    out = np.fft.ifft2(half_kinetic * np.fft.fft2(out))
    _check_finite(out, t + dt)
    return out


def step(field: Field2D, config: TrapConfig, settings: PdeSettings) -> Field2D:
    """Advance one Strang split step of size settings.dt."""
    half_kinetic = np.exp(-0.25j * settings.dt * field.grid.k_squared)
    values = _strang_step(
        field.values, field.t, field.grid, config, settings, half_kinetic
    )
    return Field2D(values=values, grid=field.grid, t=field.t + settings.dt)


@dataclass(frozen=True)
class GaussianFit:
    """Moment fit of a field: centre and covariance of |psi|², plus the
    phase-aware pieces (momentum and phase curvature from the current
    density), and the overlap fidelity with the fitted Gaussian."""

    center: np.ndarray
    covariance: np.ndarray
    fidelity: float
    momentum: np.ndarray
    phase_curvature: np.ndarray


def fit_gaussian(field: Field2D) -> GaussianFit:
    """Fit a Gaussian wave packet to a field by its moments.

    The density fixes the centre and covariance; the probability current
    fixes the momentum and the phase-curvature matrix.  Fidelity is the
    normalized overlap |<psi_fit|psi>|² with the Gaussian built from all
    fitted moments — 1 exactly iff the field is a Gausson.  Invariant under
    multiplication of the field by a global phase.
    """
    rho = np.abs(field.values) ** 2
    raw_norm = float(rho.sum())
    if not raw_norm > 0.0:
        raise ValueError("field has zero norm; nothing to fit")
    x, y = field.grid.meshes
    cx = float((rho * x).sum() / raw_norm)
    cy = float((rho * y).sum() / raw_norm)
    xt, yt = x - cx, y - cy
    cov = np.array(
        [
            [float((rho * xt * xt).sum()), float((rho * xt * yt).sum())],
            [float((rho * yt * xt).sum()), float((rho * yt * yt).sum())],
        ]
    ) / raw_norm
    det = float(np.linalg.det(cov))
    if not (np.isfinite(cov).all() and det > 0.0):
        raise DegenerateMoments(f"covariance determinant {det:.3e}")

    kx, ky = field.grid.wavenumbers
    fhat = np.fft.fft2(field.values)
    dpsi_dx = np.fft.ifft2(1j * kx * fhat)
    dpsi_dy = np.fft.ifft2(1j * ky * fhat)
    jx = np.imag(np.conj(field.values) * dpsi_dx)
    jy = np.imag(np.conj(field.values) * dpsi_dy)
    momentum = np.array([float(jx.sum()), float(jy.sum())]) / raw_norm
    m1 = np.array(
        [
            [float((xt * jx).sum()), float((xt * jy).sum())],
            [float((yt * jx).sum()), float((yt * jy).sum())],
        ]
    ) / raw_norm
    cov_inv = np.linalg.inv(cov)
    b_fit = -cov_inv @ m1
    b_fit = 0.5 * (b_fit + b_fit.T)

    a_fit = 0.5 * cov_inv
    qa = a_fit[0, 0] * xt**2 + 2.0 * a_fit[0, 1] * xt * yt + a_fit[1, 1] * yt**2
    qb = b_fit[0, 0] * xt**2 + 2.0 * b_fit[0, 1] * xt * yt + b_fit[1, 1] * yt**2
    psi_fit = np.exp(-0.5 * qa + 1j * (-0.5 * qb + momentum[0] * x + momentum[1] * y))
    overlap = np.vdot(psi_fit, field.values)
    fit_norm = float((np.abs(psi_fit) ** 2).sum())
    fid = float(abs(overlap) ** 2 / (fit_norm * raw_norm))
    return GaussianFit(
        center=np.array([cx, cy]),
        covariance=cov,
        fidelity=fid,
        momentum=momentum,
        phase_curvature=b_fit,
    )


def fidelity(a: Field2D, b: Field2D) -> float:
    """Normalized overlap |<a|b>|² / (<a|a><b|b>); grid-independent weights cancel."""
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")
    overlap = np.vdot(a.values, b.values)
    na = float((np.abs(a.values) ** 2).sum())
    nb = float((np.abs(b.values) ** 2).sum())
    if na == 0.0 or nb == 0.0:
        raise ValueError("fidelity of a zero field is undefined")
    return float(abs(overlap) ** 2 / (na * nb))


def energy_spectral(
    field: Field2D, config: TrapConfig, log_epsilon: float = 1e-30
) -> float:
    """Rotating-frame energy per particle, computed spectrally on the grid.

    E = <p²/2> + <r·V(t)·r/2> − b <log|psi|²> − Omega <L_z>, normalized by
    the field norm; conserved by the lab-frame evolution.
    """
    rho = np.abs(field.values) ** 2
    raw_norm = float(rho.sum())
    if not raw_norm > 0.0:
        raise ValueError("field has zero norm")
    fhat = np.fft.fft2(field.values)
    kx, ky = field.grid.wavenumbers
    dpsi_dx = np.fft.ifft2(1j * kx * fhat)
    dpsi_dy = np.fft.ifft2(1j * ky * fhat)
    kinetic = 0.5 * float((np.abs(dpsi_dx) ** 2 + np.abs(dpsi_dy) ** 2).sum())
    potential = float((_potential_grid(field.grid, config, field.t) * rho).sum())
    log_term = -config.b * float(
        (np.log(np.maximum(rho, log_epsilon)) * rho).sum()
    )
    x, y = field.grid.meshes
    jx = np.imag(np.conj(field.values) * dpsi_dx)
    jy = np.imag(np.conj(field.values) * dpsi_dy)
    l_z = float((x * jy - y * jx).sum())
    return (kinetic + potential + log_term - config.Omega * l_z) / raw_norm


@dataclass(frozen=True)
class PdeTrajectory:
    """Diagnostics time series plus whichever field samples were retained."""

    samples: tuple[Field2D, ...]
    times: np.ndarray
    norm: np.ndarray
    energy: np.ndarray
    cov_xx: np.ndarray
    cov_yy: np.ndarray
    cov_xy: np.ndarray
    fidelity_vs_gausson: np.ndarray

    @property
    def final(self) -> Field2D:
        return self.samples[-1]

    def to_csv(self, path: str | Path) -> None:
        write_pde_csv(self, path)


def evolve(
    initial: Field2D,
    config: TrapConfig,
    settings: PdeSettings,
    observer: Callable[[Field2D], None] | None = None,
) -> PdeTrajectory:
    """Propagate a field to t_end, recording diagnostics every
    ``sample_every`` steps (plus the initial and final instants).

    ``observer``, if given, is called with each diagnostic-sample field;
    use it to accumulate custom comparisons without retaining every field.
    """
    n_steps = int(round(settings.t_end / settings.dt))
    if n_steps < 1 or abs(n_steps * settings.dt - settings.t_end) > 1e-9 * max(
        1.0, settings.t_end
    ):
        raise ValueError(
            f"t_end={settings.t_end} is not an integer number of steps dt={settings.dt}"
        )
    grid = initial.grid
    half_kinetic = np.exp(-0.25j * settings.dt * grid.k_squared)

    times: list[float] = []
    norms: list[float] = []
    energies: list[float] = []
    covs: list[np.ndarray] = []
    fids: list[float] = []
    kept: list[Field2D] = []

    def record(field: Field2D, sample_index: int) -> None:
        times.append(field.t)
        norms.append(field.norm())
        energies.append(energy_spectral(field, config, settings.log_epsilon))
        fit = fit_gaussian(field)
        cov = fit.covariance
        if settings.frame is Frame.ROTATING:
            r = rotation_matrix(-config.Omega * field.t)
            cov = r @ cov @ r.T
        covs.append(cov)
        fids.append(fit.fidelity)
        if settings.store_every and sample_index % settings.store_every == 0:
            kept.append(field)
        if observer is not None:
            observer(field)

    field = initial
    record(field, 0)
    values = field.values
    t0 = initial.t
    sample_index = 0
    for k in range(n_steps):
        t = t0 + k * settings.dt
        values = _strang_step(values, t, grid, config, settings, half_kinetic)
        if (k + 1) % settings.sample_every == 0 or k + 1 == n_steps:
            sample_index += 1
            field = Field2D(values=values, grid=grid, t=t0 + (k + 1) * settings.dt)
            record(field, sample_index)

    if not kept or kept[-1].t != field.t:
        kept.append(field)
    if kept[0].t != initial.t:
        kept.insert(0, initial)
    return PdeTrajectory(
        samples=tuple(kept),
        times=np.array(times),
        norm=np.array(norms),
        energy=np.array(energies),
        cov_xx=np.array([c[0, 0] for c in covs]),
        cov_yy=np.array([c[1, 1] for c in covs]),
        cov_xy=np.array([c[0, 1] for c in covs]),
        fidelity_vs_gausson=np.array(fids),
    )


def gausson_field(state: GaussonState, grid: Grid2D) -> Field2D:
    """Sample a Gaussian wave packet on a grid."""
    if state.dim != 2:
        raise ValueError("the spectral solver is two-dimensional")
    x, y = grid.meshes
    pts = np.column_stack([x.ravel(), y.ravel()])
    values = evaluate_wavefunction(state, pts).reshape(grid.n, grid.n)
    return Field2D(values=values, grid=grid, t=state.t)


def strang_order(
    initial: Field2D,
    config: TrapConfig,
    settings: PdeSettings,
    dts: Sequence[float] = (2e-3, 1e-3, 5e-4, 2.5e-4),
) -> tuple[list[float], list[float]]:
    """Observed convergence orders from a dt-refinement study.

    Integrates to settings.t_end for each dt in ``dts`` and against a
    reference at min(dts)/4; returns (orders, errors) where orders[i] is the
    rate observed between dts[i] and dts[i+1].  Every dt must divide t_end.
    """
    dts = sorted(dts, reverse=True)

    def final_values(dt: float) -> np.ndarray:
        s = PdeSettings(
            dt=dt,
            t_end=settings.t_end,
            log_epsilon=settings.log_epsilon,
            frame=settings.frame,
            sample_every=10**9,
            store_every=0,
        )
        return evolve(initial, config, s).final.values

    ref = final_values(min(dts) / 4.0)
    dx = initial.grid.dx
    errors = [
        float(np.sqrt((np.abs(final_values(dt) - ref) ** 2).sum()) * dx) for dt in dts
    ]
    orders = [
        math.log2(errors[i] / errors[i + 1]) for i in range(len(errors) - 1)
    ]
    return orders, errors


# ---------------------------------------------------------------------------
# Snapshots: little-endian header (n: uint32, L: float64, t: float64), then
# n*n little-endian complex64 values, row-major.
# ---------------------------------------------------------------------------

_HEADER = struct.Struct("<Idd")


def write_field(field: Field2D, path: str | Path) -> None:
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(field.grid.n, field.grid.L, field.t))
        fh.write(np.ascontiguousarray(field.values.astype("<c8")).tobytes())


def read_field(path: str | Path) -> Field2D:
    blob = Path(path).read_bytes()
    n, L, t = _HEADER.unpack_from(blob)
    values = np.frombuffer(blob[_HEADER.size :], dtype="<c8").reshape(n, n)
    return Field2D(values=values.astype(complex), grid=Grid2D(n=n, L=L), t=t)


def write_pde_csv(traj: PdeTrajectory, path: str | Path) -> None:
    buf = io.StringIO()
    buf.write("t,norm,energy,cov_xx,cov_yy,cov_xy,fidelity_vs_gausson\n")
    for j in range(len(traj.times)):
        row = (
            traj.times[j],
            traj.norm[j],
            traj.energy[j],
            traj.cov_xx[j],
            traj.cov_yy[j],
            traj.cov_xy[j],
            traj.fidelity_vs_gausson[j],
        )
        buf.write(",".join(f"{v:.16e}" for v in row) + "\n")
    Path(path).write_text(buf.getvalue())
