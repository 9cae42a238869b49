"""Domain types and geometry for Gaussian wave packets in a rotating trap.

Everything downstream works with two symmetric d×d matrices: ``A`` (inverse
square widths) and ``B`` (phase curvature), plus centre-of-mass coordinates
``xi``/``pi`` and the scalar amplitude/phase pair ``N``/``f``.  The wave
packet they parameterize is

    psi(r) = N * exp(i f) * exp(-1/2 rt·(A + iB)·rt + i pi·r),   rt = r - xi.

Symmetry of A and B is structural: states store only the upper triangle, so
a non-symmetric matrix cannot be represented.  All types are immutable value
types; arrays are set read-only at construction.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

__all__ = [
    "TrapConfig",
    "GaussonState",
    "StationaryPoint",
    "FoldEvent",
    "BranchScan",
    "Stability",
    "pack_symmetric",
    "unpack_symmetric",
    "rotation_matrix",
    "evaluate_wavefunction",
    "gausson_norm",
    "rotate_frame",
]

# Upper-triangle packing order: diagonal first, then off-diagonals row-wise.
# d=2: (M11, M22, M12);  d=3: (M11, M22, M33, M12, M13, M23).
_OFFDIAG = {2: ((0, 1),), 3: ((0, 1), (0, 2), (1, 2))}


def sym_size(dim: int) -> int:
    """Number of independent entries of a symmetric dim×dim matrix."""
    return dim * (dim + 1) // 2


def pack_symmetric(m: np.ndarray) -> np.ndarray:
    """Pack a symmetric matrix into its independent entries (diagonal first)."""
    m = np.asarray(m, dtype=float)
    dim = m.shape[0]
    if m.shape != (dim, dim) or dim not in (2, 3):
        raise ValueError(f"expected a 2x2 or 3x3 matrix, got shape {m.shape}")
    if not np.allclose(m, m.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(m).max())):
        raise ValueError("matrix is not symmetric")
    out = np.empty(sym_size(dim))
    out[:dim] = np.diag(m)
    for k, (i, j) in enumerate(_OFFDIAG[dim]):
        out[dim + k] = 0.5 * (m[i, j] + m[j, i])
    return out


def unpack_symmetric(v: np.ndarray, dim: int) -> np.ndarray:
    """Inverse of :func:`pack_symmetric`."""
    v = np.asarray(v, dtype=float)
    if v.shape != (sym_size(dim),):
        raise ValueError(f"expected {sym_size(dim)} packed entries, got shape {v.shape}")
    m = np.diag(v[:dim]).astype(float)
    for k, (i, j) in enumerate(_OFFDIAG[dim]):
        m[i, j] = m[j, i] = v[dim + k]
    return m


def rotation_matrix(angle: float, dim: int = 2) -> np.ndarray:
    """Counterclockwise rotation about the third principal axis."""
    c, s = math.cos(angle), math.sin(angle)
    if dim == 2:
        return np.array([[c, -s], [s, c]])
    if dim == 3:
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    raise ValueError(f"dim must be 2 or 3, got {dim}")


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TrapConfig:
    """Harmonic trap, rotation rate and nonlinearity strength (ħ = m = 1).

    Parameters
    ----------
    omega1, omega2 : float
        Principal trap frequencies in the rotation plane, ``omega1 < omega2``
        by convention (both strictly positive).
    Omega : float
        Rotation rate about the third principal axis.  Negative values are
        normalized to ``|Omega|`` at construction: the stationary problem is
        invariant under ``(Omega, beta) -> (-Omega, -beta)``, so the reflected
        configuration carries the same physics.
    b : float
        Nonlinearity strength; positive means attraction.
    omega3 : float, optional
        Out-of-plane trap frequency, 3D only.
    dim : int
        Spatial dimension, 2 or 3.
    """

    omega1: float
    omega2: float
    Omega: float = 0.0
    b: float = 0.0
    omega3: float | None = None
    dim: int = 2

    def __post_init__(self) -> None:
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if not (self.omega1 > 0.0 and self.omega2 > 0.0):
            raise ValueError("trap frequencies must be positive")
        if not self.omega1 < self.omega2:
            raise ValueError(
                f"convention omega1 < omega2 violated: {self.omega1} >= {self.omega2}"
            )
        if self.dim == 3:
            if self.omega3 is None or not self.omega3 > 0.0:
                raise ValueError("dim=3 requires a positive omega3")
        elif self.omega3 is not None:
            raise ValueError("omega3 is only meaningful for dim=3")
        if self.Omega < 0.0:
            object.__setattr__(self, "Omega", -self.Omega)
        if not all(np.isfinite([self.omega1, self.omega2, self.Omega, self.b])):
            raise ValueError("trap parameters must be finite")

    @property
    def vmat(self) -> np.ndarray:
        """Diagonal matrix of squared trap frequencies."""
        if self.dim == 2:
            return np.diag([self.omega1**2, self.omega2**2])
        return np.diag([self.omega1**2, self.omega2**2, self.omega3**2])

    @property
    def omega_matrix(self) -> np.ndarray:
        """Antisymmetric matrix W with W·v = Omega ẑ × v (restricted to the plane in 2D)."""
        w = np.zeros((self.dim, self.dim))
        w[0, 1] = -self.Omega
        w[1, 0] = self.Omega
        return w

    def with_rotation(self, Omega: float) -> "TrapConfig":
        """Copy of this configuration at a different rotation rate."""
        return replace(self, Omega=Omega)


@dataclass(frozen=True)
class GaussonState:
    """Instantaneous Gaussian wave-packet parameters.

    Construct via :meth:`from_matrices` unless you already hold packed
    upper-triangle entries (diagonal first, then off-diagonals row-wise).
    """

    a_upper: np.ndarray
    b_upper: np.ndarray
    xi: np.ndarray
    pi: np.ndarray
    N: float = 1.0
    f: float = 0.0
    t: float = 0.0

    def __post_init__(self) -> None:
        dim = len(np.atleast_1d(self.xi))
        if dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {dim}")
        m = sym_size(dim)
        for name in ("a_upper", "b_upper"):
            v = np.atleast_1d(getattr(self, name))
            if v.shape != (m,):
                raise ValueError(f"{name} must have {m} entries for dim={dim}")
            object.__setattr__(self, name, _readonly(v))
        for name in ("xi", "pi"):
            v = np.atleast_1d(getattr(self, name))
            if v.shape != (dim,):
                raise ValueError(f"{name} must have {dim} entries")
            object.__setattr__(self, name, _readonly(v))
        if not self.N > 0.0:
            raise ValueError(f"amplitude N must be positive, got {self.N}")
        a = unpack_symmetric(self.a_upper, dim)
        if np.linalg.eigvalsh(a)[0] <= 0.0:
            raise ValueError("width matrix A must be positive definite")

    @classmethod
    def from_matrices(
        cls,
        A: np.ndarray,
        B: np.ndarray,
        xi: Sequence[float] | np.ndarray | None = None,
        pi: Sequence[float] | np.ndarray | None = None,
        N: float = 1.0,
        f: float = 0.0,
        t: float = 0.0,
    ) -> "GaussonState":
        """Build a state from full symmetric matrices (validated and packed)."""
        A = np.asarray(A, dtype=float)
        dim = A.shape[0]
        if xi is None:
            xi = np.zeros(dim)
        if pi is None:
            pi = np.zeros(dim)
        return cls(
            a_upper=pack_symmetric(A),
            b_upper=pack_symmetric(np.asarray(B, dtype=float)),
            xi=np.asarray(xi, dtype=float),
            pi=np.asarray(pi, dtype=float),
            N=N,
            f=f,
            t=t,
        )

    @property
    def dim(self) -> int:
        return len(self.xi)

    @property
    def A(self) -> np.ndarray:
        """Inverse-square-width matrix (symmetric positive definite)."""
        return unpack_symmetric(self.a_upper, self.dim)

    @property
    def B(self) -> np.ndarray:
        """Phase-curvature matrix (symmetric)."""
        return unpack_symmetric(self.b_upper, self.dim)


class Stability(enum.Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"
    MARGINAL = "Marginal"

    def __str__(self) -> str:  # CSV- and report-friendly
        return self.value


@dataclass(frozen=True)
class StationaryPoint:
    """One stationary Gausson in the rotating frame.

    ``alpha1`` and ``alpha2`` are the diagonal entries of A, ``beta`` the
    off-diagonal entry of B; the off-diagonal of A and the diagonal of B
    vanish for stationary solutions.  ``residual`` is the max absolute value
    of the three stationarity equations at this point.
    """

    alpha1: float
    alpha2: float
    beta: float
    Omega: float
    residual: float
    stability: Stability | None = None
    branch_id: int = -1

    def __post_init__(self) -> None:
        if not (self.alpha1 > 0.0 and self.alpha2 > 0.0):
            raise ValueError(
                f"widths must be positive, got alpha1={self.alpha1}, alpha2={self.alpha2}"
            )

    @property
    def A(self) -> np.ndarray:
        return np.diag([self.alpha1, self.alpha2])

    @property
    def B(self) -> np.ndarray:
        return np.array([[0.0, self.beta], [self.beta, 0.0]])

    def as_gausson_state(self, normalized: bool = True) -> GaussonState:
        """Materialize as a GaussonState at t=0 (unit norm if ``normalized``)."""
        N = (self.alpha1 * self.alpha2) ** 0.25 / math.sqrt(math.pi) if normalized else 1.0
        return GaussonState.from_matrices(self.A, self.B, N=N)


@dataclass(frozen=True)
class FoldEvent:
    """A turning point where two solution branches meet and annihilate."""

    Omega: float
    alpha1: float
    alpha2: float
    beta: float
    branch_ids: tuple[int, int]


@dataclass(frozen=True)
class BranchScan:
    """All stationary solutions found on a grid of rotation rates."""

    config: TrapConfig  # Omega field is ignored; the grid carries the rotation rate
    omega_grid: np.ndarray
    points: tuple[StationaryPoint, ...]
    multiplicity: np.ndarray
    folds: tuple[FoldEvent, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "omega_grid", _readonly(self.omega_grid))
        mult = np.array(self.multiplicity, dtype=int)
        mult.setflags(write=False)
        object.__setattr__(self, "multiplicity", mult)
        object.__setattr__(self, "points", tuple(self.points))
        object.__setattr__(self, "folds", tuple(self.folds))

    def at(self, omega: float, atol: float = 1e-12) -> list[StationaryPoint]:
        """Points of the scan whose rotation rate matches ``omega``."""
        return [p for p in self.points if abs(p.Omega - omega) <= atol]

    def branch(self, branch_id: int) -> list[StationaryPoint]:
        """Points of one branch, ordered by rotation rate."""
        return sorted(
            (p for p in self.points if p.branch_id == branch_id), key=lambda p: p.Omega
        )

    @property
    def branch_ids(self) -> list[int]:
        return sorted({p.branch_id for p in self.points})


def evaluate_wavefunction(state: GaussonState, points: np.ndarray) -> np.ndarray:
    """Evaluate the Gaussian wave packet at one or more positions.

    Parameters
    ----------
    state : GaussonState
    points : array_like
        Either a single position of shape (d,) or a batch of shape (m, d).

    Returns
    -------
    np.ndarray
        Complex amplitudes, shape () for a single point or (m,) for a batch.
    """
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[1] != state.dim:
        raise ValueError(f"points must have {state.dim} coordinates, got {pts.shape[1]}")
    rt = pts - state.xi
    qa = np.einsum("ni,ij,nj->n", rt, state.A, rt)
    qb = np.einsum("ni,ij,nj->n", rt, state.B, rt)
    out = state.N * np.exp(
        -0.5 * qa + 1j * (state.f - 0.5 * qb + pts @ state.pi)
    )
    return out[0] if single else out


def gausson_norm(state: GaussonState) -> float:
    """Integral of |psi|² over all space, in closed form: N²·π^{d/2}·det(A)^{−1/2}."""
    det_a = float(np.linalg.det(state.A))
    if det_a <= 0.0:
        raise ValueError(f"det(A) must be positive, got {det_a}")
    return state.N**2 * math.pi ** (state.dim / 2) / math.sqrt(det_a)


def rotate_frame(state: GaussonState, angle: float) -> GaussonState:
    """Rotate a state about the third principal axis by ``angle``.

    Maps a rotating-frame solution to the lab frame when called with
    ``angle = Omega * t``: A and B are conjugated by R(angle), xi and pi are
    rotated.  N, f, t are unchanged.
    """
    r = rotation_matrix(angle, state.dim)
    return GaussonState.from_matrices(
        r @ state.A @ r.T,
        r @ state.B @ r.T,
        xi=r @ state.xi,
        pi=r @ state.pi,
        N=state.N,
        f=state.f,
        t=state.t,
    )
