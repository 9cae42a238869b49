"""Time integration of the Gaussian-ansatz equations in the rotating frame.

The wave-packet parameters obey the closed system

    dA/dt  = BA + AB - [W, A]
    dB/dt  = B**2 - A**2 + V + 2 b A - [W, B]
    dxi/dt = pi - Omega x xi
    dpi/dt = -V xi - Omega x pi
    dN/dt  = Tr(B) N / 2
    df/dt  = -(Tr(A) + pi.pi - xi.V.xi) / 2

where V is the diagonal trap matrix and W is the antisymmetric matrix with
W v = Omega x v (rotation about the third principal axis).  The shape block
(A, B) is completely independent of the centre-of-mass block (xi, pi): the
right-hand side never mixes them, and the fixed-step integrator updates both
elementwise, so the computed A(t), B(t) streams are bit-for-bit identical
whatever the initial displacement.

Two integrators are provided.  Fixed-step RK4 is the reference method: fully
deterministic, suitable for golden files and exactness checks.  Adaptive
RK45 (scipy) is the production method for long runs.
"""

from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp

from .core import GaussonState, TrapConfig, gausson_norm, sym_size
from .errors import PositiveDefinitenessLost, StepUnderflow

__all__ = [
    "OdeMethod",
    "OdeSettings",
    "StateDerivative",
    "Trajectory",
    "rhs",
    "integrate",
    "energy",
    "write_trajectory_csv",
]

_MIN_EIG_FLOOR = 1e-12


class OdeMethod(enum.Enum):
    RK4_FIXED = "rk4"
    RK45_ADAPTIVE = "rk45"


@dataclass(frozen=True)
class OdeSettings:
    """Integration controls.

    ``dt`` is the step of the fixed-step method and the output stride unit
    for both methods: samples are recorded every ``sample_every`` steps, i.e.
    on the grid t0 + k*dt*sample_every.  For the adaptive method dt controls
    only the output grid; internal steps obey rel_tol/abs_tol.
    """

    t_end: float
    dt: float = 1e-3
    method: OdeMethod = OdeMethod.RK45_ADAPTIVE
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    sample_every: int = 1

    def __post_init__(self) -> None:
        if not self.t_end > 0.0:
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if not self.dt > 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not (self.rel_tol > 0.0 and self.abs_tol > 0.0):
            raise ValueError("tolerances must be positive")
        if self.sample_every < 1:
            raise ValueError(f"sample_every must be >= 1, got {self.sample_every}")


@dataclass(frozen=True)
class StateDerivative:
    """Time derivative of every GaussonState field, as full matrices/vectors."""

    dA: np.ndarray
    dB: np.ndarray
    dxi: np.ndarray
    dpi: np.ndarray
    dN: float
    df: float


# ---------------------------------------------------------------------------
# Packed state vector: [a_upper, b_upper, xi, pi, N, f].
# The A/B section of the derivative is a function of the A/B section of the
# state only -- keep it that way (see module docstring).
# ---------------------------------------------------------------------------


def _pack_state(state: GaussonState) -> np.ndarray:
    return np.concatenate(
        [state.a_upper, state.b_upper, state.xi, state.pi, [state.N, state.f]]
    )


def _unpack_state(y: np.ndarray, dim: int, t: float) -> GaussonState:
    m = sym_size(dim)
    return GaussonState(
        a_upper=y[:m],
        b_upper=y[m : 2 * m],
        xi=y[2 * m : 2 * m + dim],
        pi=y[2 * m + dim : 2 * m + 2 * dim],
        N=float(y[2 * m + 2 * dim]),
        f=float(y[2 * m + 2 * dim + 1]),
        t=t,
    )


def _shape_rhs_2d(a11, a22, a12, b11, b22, b12, Om, v1, v2, b):
    """dA, dB packed entries for d=2; used by the stability analysis too."""
    da11 = 2.0 * (b11 * a11 + b12 * a12) + 2.0 * Om * a12
    da22 = 2.0 * (b12 * a12 + b22 * a22) - 2.0 * Om * a12
    da12 = b11 * a12 + b12 * a22 + a11 * b12 + a12 * b22 + Om * (a22 - a11)
    db11 = b11 * b11 + b12 * b12 - (a11 * a11 + a12 * a12) + v1 + 2.0 * b * a11 + 2.0 * Om * b12
    db22 = b12 * b12 + b22 * b22 - (a12 * a12 + a22 * a22) + v2 + 2.0 * b * a22 - 2.0 * Om * b12
    db12 = b12 * (b11 + b22) - a12 * (a11 + a22) + 2.0 * b * a12 + Om * (b22 - b11)
    return da11, da22, da12, db11, db22, db12


def _rhs_packed(y: np.ndarray, config: TrapConfig) -> np.ndarray:
    dim = config.dim
    m = sym_size(dim)
    out = np.empty_like(y)

    if dim == 2:
        a11, a22, a12 = y[0], y[1], y[2]
        b11, b22, b12 = y[3], y[4], y[5]
        out[0], out[1], out[2], out[3], out[4], out[5] = _shape_rhs_2d(
            a11, a22, a12, b11, b22, b12,
            config.Omega, config.omega1**2, config.omega2**2, config.b,
        )
    else:
        from .core import pack_symmetric, unpack_symmetric

        A = unpack_symmetric(y[:m], dim)
        B = unpack_symmetric(y[m : 2 * m], dim)
        W = config.omega_matrix
        V = config.vmat
        dA = B @ A + A @ B - (W @ A - A @ W)
        dB = B @ B - A @ A + V + 2.0 * config.b * A - (W @ B - B @ W)
        out[:m] = pack_symmetric(dA)
        out[m : 2 * m] = pack_symmetric(dB)

    xi = y[2 * m : 2 * m + dim]
    pi = y[2 * m + dim : 2 * m + 2 * dim]
    Om = config.Omega
    vdiag = np.diag(config.vmat)
    # Omega x v restricted to rotation about the third axis.
    cross_xi = np.zeros(dim)
    cross_pi = np.zeros(dim)
    cross_xi[0], cross_xi[1] = -Om * xi[1], Om * xi[0]
    cross_pi[0], cross_pi[1] = -Om * pi[1], Om * pi[0]
    out[2 * m : 2 * m + dim] = pi - cross_xi
    out[2 * m + dim : 2 * m + 2 * dim] = -vdiag * xi - cross_pi

    tr_a = y[:dim].sum()
    tr_b = y[m : m + dim].sum()
    N = y[2 * m + 2 * dim]
    out[2 * m + 2 * dim] = 0.5 * tr_b * N
    out[2 * m + 2 * dim + 1] = -0.5 * (tr_a + pi @ pi - xi @ (vdiag * xi))
    return out


def rhs(state: GaussonState, config: TrapConfig) -> StateDerivative:
    """Time derivative of a state under the rotating-frame flow."""
    if state.dim != config.dim:
        raise ValueError(f"state is {state.dim}D but config is {config.dim}D")
    from .core import unpack_symmetric

    dy = _rhs_packed(_pack_state(state), config)
    m = sym_size(state.dim)
    d = state.dim
    return StateDerivative(
        dA=unpack_symmetric(dy[:m], d),
        dB=unpack_symmetric(dy[m : 2 * m], d),
        dxi=dy[2 * m : 2 * m + d].copy(),
        dpi=dy[2 * m + d : 2 * m + 2 * d].copy(),
        dN=float(dy[2 * m + 2 * d]),
        df=float(dy[2 * m + 2 * d + 1]),
    )


def _min_eig_packed(y: np.ndarray, dim: int) -> float:
    if dim == 2:
        a11, a22, a12 = y[0], y[1], y[2]
        return 0.5 * (a11 + a22 - math.hypot(a11 - a22, 2.0 * a12))
    from .core import unpack_symmetric

    return float(np.linalg.eigvalsh(unpack_symmetric(y[: sym_size(dim)], dim))[0])


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution of the ansatz flow with per-sample diagnostics."""

    config: TrapConfig
    samples: tuple[GaussonState, ...]
    norm: np.ndarray
    energy: np.ndarray
    min_eig_a: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    @property
    def final(self) -> GaussonState:
        return self.samples[-1]

    def to_csv(self, path: str | Path) -> None:
        write_trajectory_csv(self, path)


def _collect(config: TrapConfig, states: list[GaussonState]) -> Trajectory:
    return Trajectory(
        config=config,
        samples=tuple(states),
        norm=np.array([gausson_norm(s) for s in states]),
        energy=np.array([energy(s, config) for s in states]),
        min_eig_a=np.array(
            [_min_eig_packed(s.a_upper, s.dim) for s in states]
        ),
    )


def integrate(
    initial: GaussonState, config: TrapConfig, settings: OdeSettings
) -> Trajectory:
    """Integrate the ansatz flow from ``initial`` over [t0, t0 + t_end].

    Raises
    ------
    PositiveDefinitenessLost
        If the smallest eigenvalue of A drops below 1e-12 (the packet has
        collapsed or blown up past the representable class).
    StepUnderflow
        If the adaptive integrator cannot satisfy its tolerances.
    """
    if initial.dim != config.dim:
        raise ValueError(f"initial state is {initial.dim}D but config is {config.dim}D")
    y0 = _pack_state(initial)
    t0 = initial.t
    dim = config.dim

    if settings.method is OdeMethod.RK4_FIXED:
        return _integrate_rk4(y0, t0, dim, config, settings)
    return _integrate_rk45(y0, t0, dim, config, settings)


def _integrate_rk4(
    y0: np.ndarray, t0: float, dim: int, config: TrapConfig, settings: OdeSettings
) -> Trajectory:
    dt = settings.dt
    n_steps = int(round(settings.t_end / dt))
    if n_steps < 1 or abs(n_steps * dt - settings.t_end) > 1e-9 * max(1.0, settings.t_end):
        raise ValueError(
            f"t_end={settings.t_end} is not an integer number of steps dt={dt}"
        )
    states = [_unpack_state(y0, dim, t0)]
    y = y0.copy()
    for k in range(n_steps):
        t = t0 + k * dt
        k1 = _rhs_packed(y, config)
        k2 = _rhs_packed(y + 0.5 * dt * k1, config)
        k3 = _rhs_packed(y + 0.5 * dt * k2, config)
        k4 = _rhs_packed(y + dt * k3, config)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t_next = t0 + (k + 1) * dt
        min_eig = _min_eig_packed(y, dim)
        if not np.isfinite(y).all() or min_eig < _MIN_EIG_FLOOR:
            raise PositiveDefinitenessLost(t_next, min_eig)
        if (k + 1) % settings.sample_every == 0 or k + 1 == n_steps:
            states.append(_unpack_state(y, dim, t_next))
    return _collect(config, states)


def _integrate_rk45(
    y0: np.ndarray, t0: float, dim: int, config: TrapConfig, settings: OdeSettings
) -> Trajectory:
    stride = settings.dt * settings.sample_every
    n_out = int(math.floor(settings.t_end / stride + 1e-9))
    t_eval = t0 + stride * np.arange(n_out + 1)
    if t_eval[-1] < t0 + settings.t_end - 1e-12 * max(1.0, settings.t_end):
        t_eval = np.append(t_eval, t0 + settings.t_end)

    def fun(t: float, y: np.ndarray) -> np.ndarray:
        return _rhs_packed(y, config)

    def posdef_event(t: float, y: np.ndarray) -> float:
        return _min_eig_packed(y, dim) - _MIN_EIG_FLOOR

    posdef_event.terminal = True
    posdef_event.direction = -1

    sol = solve_ivp(
        fun,
        (t0, t0 + settings.t_end),
        y0,
        method="RK45",
        rtol=settings.rel_tol,
        atol=settings.abs_tol,
        t_eval=t_eval,
        events=posdef_event,
    )
    if sol.status == 1:
        t_ev = float(sol.t_events[0][0])
        raise PositiveDefinitenessLost(t_ev)
    if sol.status != 0:
        raise StepUnderflow(f"adaptive integration failed: {sol.message}")
    states = [
        _unpack_state(sol.y[:, j], dim, float(sol.t[j])) for j in range(sol.y.shape[1])
    ]
    return _collect(config, states)


def energy(state: GaussonState, config: TrapConfig) -> float:
    """Rotating-frame energy per particle, in closed form on the ansatz.

    E = <p²/2 + r·V·r/2 − b log|ψ|² − Ω M_z> / <ψ|ψ>, using the Gaussian
    moment identities with covariance Σ = A⁻¹/2:

        <p²/2>      = [Tr((A² + B²)Σ) + π·π] / 2
        <r·V·r/2>   = [Tr(VΣ) + ξ·V·ξ] / 2
        <log|ψ|²>   = log N² − d/2
        <M_z>       = (ξ×π)_z − [(BΣ)₂₁ − (BΣ)₁₂]

    Conserved along trajectories of :func:`integrate`.
    """
    if state.dim != config.dim:
        raise ValueError(f"state is {state.dim}D but config is {config.dim}D")
    A, B = state.A, state.B
    V = config.vmat
    sigma = 0.5 * np.linalg.inv(A)
    xi, pi = state.xi, state.pi
    kinetic = 0.5 * (np.trace((A @ A + B @ B) @ sigma) + pi @ pi)
    potential = 0.5 * (np.trace(V @ sigma) + xi @ V @ xi)
    log_term = -config.b * (2.0 * math.log(state.N) - state.dim / 2.0)
    bs = B @ sigma
    m_z = (xi[0] * pi[1] - xi[1] * pi[0]) - (bs[1, 0] - bs[0, 1])
    return float(kinetic + potential + log_term - config.Omega * m_z)


_CSV_HEADERS = {
    2: "t,A11,A22,A12,B11,B22,B12,xi1,xi2,pi1,pi2,N,f,norm,energy,min_eig_A",
    3: (
        "t,A11,A22,A33,A12,A13,A23,B11,B22,B33,B12,B13,B23,"
        "xi1,xi2,xi3,pi1,pi2,pi3,N,f,norm,energy,min_eig_A"
    ),
}


def write_trajectory_csv(traj: Trajectory, path: str | Path) -> None:
    """Write one row per sample; 17 significant digits throughout."""
    dim = traj.samples[0].dim
    buf = io.StringIO()
    buf.write(_CSV_HEADERS[dim] + "\n")
    for j, s in enumerate(traj.samples):
        row = np.concatenate(
            [
                [s.t],
                s.a_upper,
                s.b_upper,
                s.xi,
                s.pi,
                [s.N, s.f, traj.norm[j], traj.energy[j], traj.min_eig_a[j]],
            ]
        )
        buf.write(",".join(f"{v:.16e}" for v in row) + "\n")
    Path(path).write_text(buf.getvalue())
