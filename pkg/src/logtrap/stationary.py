"""Stationary Gausson solutions and their dependence on the rotation rate.

A stationary wave packet in the rotating frame has A = Diag(alpha1, alpha2),
B with the single off-diagonal entry beta, and centre of mass at rest at the
origin.  The parameters solve three coupled equations:

    r1 = (alpha1 + alpha2) beta - (alpha1 - alpha2) Omega
    r2 = beta**2 - alpha1**2 + omega1**2 + 2 b alpha1 + 2 beta Omega
    r3 = beta**2 - alpha2**2 + omega2**2 + 2 b alpha2 - 2 beta Omega

Closed forms exist without rotation (beta = 0) and without nonlinearity; the
general case is solved numerically.  The first equation is linear in beta, so
the solver eliminates beta = Omega (alpha1 - alpha2)/(alpha1 + alpha2) (safe:
alpha1 + alpha2 > 0 on the physical domain) and multi-starts Newton on the
remaining two equations from a sign-change-guided lattice.  Roots may number
0 through 3 depending on (b, Omega).

Branch tracing scans a grid of rotation rates, links roots across adjacent
grid points by nearest neighbour, and resolves multiplicity changes that are
not boundary entries/exits by pseudo-arclength continuation around the fold,
refining the fold location with Newton on an extended system.
"""

from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import BranchScan, FoldEvent, StationaryPoint, TrapConfig
from .errors import BranchAmbiguity, OutsideStabilityRegion

__all__ = [
    "Region",
    "StationaritySystem",
    "ContinuationSettings",
    "residual",
    "solve_zero_rotation",
    "solve_linear_rotating",
    "find_all_roots",
    "brute_force_roots",
    "trace_branches",
    "bracket_multiplicity_change",
    "certify_fold_bracket",
    "write_branch_scan_csv",
]


class Region(enum.Enum):
    """Which side of the instability gap a linear (b=0) branch lives on."""

    BELOW = "below"  # Omega < omega1
    ABOVE = "above"  # Omega > omega2


@dataclass(frozen=True)
class StationaritySystem:
    """The three stationarity equations at a fixed configuration (2D only)."""

    config: TrapConfig

    def __post_init__(self) -> None:
        if self.config.dim != 2:
            raise ValueError("stationary analysis is two-dimensional only")

    def residual(self, alpha1: float, alpha2: float, beta: float) -> tuple[float, float, float]:
        return residual((alpha1, alpha2, beta), self.config)


@dataclass(frozen=True)
class ContinuationSettings:
    """Knobs for the multi-start root search and the branch scan.

    ``n_grid`` is the per-axis resolution of the multi-start lattice at one
    rotation rate; ``n_omega`` the number of scan points on
    [omega_min, omega_max].  ``alpha_max`` defaults to 4 max(omega2, |b|) + 4,
    which bounds every closed-form branch for the parameter ranges of
    interest.
    """

    omega_min: float = 0.0
    omega_max: float = 2.0
    n_omega: int = 801
    n_grid: int = 400
    newton_tol: float = 1e-12
    newton_max_iter: int = 50
    dedupe_radius: float = 1e-6
    arc_step: float = 0.01
    alpha_max: float | None = None

    def __post_init__(self) -> None:
        if not self.omega_min < self.omega_max:
            raise ValueError("omega_min must be below omega_max")
        if self.omega_min < 0.0:
            raise ValueError("rotation rates are normalized to be non-negative")
        if min(self.n_omega, self.n_grid) < 2:
            raise ValueError("grids need at least 2 points")
        for name in ("newton_tol", "dedupe_radius", "arc_step"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if self.newton_max_iter < 1:
            raise ValueError("newton_max_iter must be >= 1")
        if self.alpha_max is not None and not self.alpha_max > 0.0:
            raise ValueError("alpha_max must be positive")

    def box_limit(self, config: TrapConfig) -> float:
        if self.alpha_max is not None:
            return self.alpha_max
        return 4.0 * max(config.omega2, abs(config.b)) + 4.0


def residual(
    point: StationaryPoint | Sequence[float], config: TrapConfig
) -> tuple[float, float, float]:
    """The three stationarity equations evaluated at (alpha1, alpha2, beta)."""
    if config.dim != 2:
        raise ValueError("stationary analysis is two-dimensional only")
    if isinstance(point, StationaryPoint):
        a1, a2, beta = point.alpha1, point.alpha2, point.beta
    else:
        a1, a2, beta = (float(v) for v in point)
    Om, b = config.Omega, config.b
    w1sq, w2sq = config.omega1**2, config.omega2**2
    r1 = (a1 + a2) * beta - (a1 - a2) * Om
    r2 = beta**2 - a1**2 + w1sq + 2.0 * b * a1 + 2.0 * beta * Om
    r3 = beta**2 - a2**2 + w2sq + 2.0 * b * a2 - 2.0 * beta * Om
    return (r1, r2, r3)


def _max_residual(a1: float, a2: float, beta: float, config: TrapConfig) -> float:
    return max(abs(r) for r in residual((a1, a2, beta), config))


def solve_zero_rotation(config: TrapConfig) -> StationaryPoint:
    """Closed-form stationary widths without rotation: beta vanishes and
    alpha_i = omega_i sqrt(1 + b²/omega_i²) + b, the unique positive pair."""
    if config.Omega != 0.0:
        raise ValueError("solve_zero_rotation requires Omega = 0")
    if config.dim != 2:
        raise ValueError("stationary analysis is two-dimensional only")
    b = config.b
    a1 = config.omega1 * math.sqrt(1.0 + b**2 / config.omega1**2) + b
    a2 = config.omega2 * math.sqrt(1.0 + b**2 / config.omega2**2) + b
    return StationaryPoint(
        alpha1=a1,
        alpha2=a2,
        beta=0.0,
        Omega=0.0,
        residual=_max_residual(a1, a2, 0.0, config),
    )


def solve_linear_rotating(config: TrapConfig, region: Region) -> StationaryPoint:
    """Closed-form rotating solution for the linear trap (b = 0).

    Real solutions exist below omega1 and above omega2 only; the sign inside
    the width formula is + in the lower region and − in the upper one.
    """
    if config.b != 0.0:
        raise ValueError("solve_linear_rotating requires b = 0")
    if config.dim != 2:
        raise ValueError("stationary analysis is two-dimensional only")
    Om = config.Omega
    w1, w2 = config.omega1, config.omega2
    if w1 <= Om <= w2:
        raise OutsideStabilityRegion(
            f"no real widths for omega1 <= Omega <= omega2 ({w1:.6g} <= {Om:.6g} <= {w2:.6g})"
        )
    if region is Region.BELOW and not Om < w1:
        raise ValueError(f"region Below requires Omega < omega1, got Omega={Om:.6g}")
    if region is Region.ABOVE and not Om > w2:
        raise ValueError(f"region Above requires Omega > omega2, got Omega={Om:.6g}")
    d1 = w1**2 - Om**2
    d2 = w2**2 - Om**2
    s = math.sqrt(d2 / d1)
    sign = 1.0 if region is Region.BELOW else -1.0
    num = math.sqrt(w1**2 + w2**2 + 2.0 * Om**2 + sign * 2.0 * math.sqrt(d1 * d2))
    a1 = num / (1.0 + s)
    a2 = num * s / (1.0 + s)
    beta = Om * (1.0 - s) / (1.0 + s)
    return StationaryPoint(
        alpha1=a1,
        alpha2=a2,
        beta=beta,
        Omega=Om,
        residual=_max_residual(a1, a2, beta, config),
    )


# ---------------------------------------------------------------------------
# Reduced two-equation system in (alpha1, alpha2) after eliminating beta.
# ---------------------------------------------------------------------------


def _beta_of(a1, a2, Om):
    return Om * (a1 - a2) / (a1 + a2)


def _reduced(a1, a2, config: TrapConfig):
    """g1, g2 of the reduced system; works elementwise on arrays."""
    Om, b = config.Omega, config.b
    beta = _beta_of(a1, a2, Om)
    g1 = beta**2 - a1**2 + config.omega1**2 + 2.0 * b * a1 + 2.0 * beta * Om
    g2 = beta**2 - a2**2 + config.omega2**2 + 2.0 * b * a2 - 2.0 * beta * Om
    return g1, g2


def _reduced_jacobian(a1: float, a2: float, config: TrapConfig) -> np.ndarray:
    Om, b = config.Omega, config.b
    s = a1 + a2
    beta = _beta_of(a1, a2, Om)
    db_da1 = 2.0 * Om * a2 / s**2
    db_da2 = -2.0 * Om * a1 / s**2
    return np.array(
        [
            [(2.0 * beta + 2.0 * Om) * db_da1 - 2.0 * a1 + 2.0 * b,
             (2.0 * beta + 2.0 * Om) * db_da2],
            [(2.0 * beta - 2.0 * Om) * db_da1,
             (2.0 * beta - 2.0 * Om) * db_da2 - 2.0 * a2 + 2.0 * b],
        ]
    )


def _newton_reduced(
    a1: float, a2: float, config: TrapConfig, tol: float, max_iter: int
) -> tuple[float, float] | None:
    """Damped Newton on the reduced system; None if it fails to converge."""
    x = np.array([a1, a2])
    for _ in range(max_iter):
        g = np.array(_reduced(x[0], x[1], config))
        if max(abs(g[0]), abs(g[1])) < tol:
            return float(x[0]), float(x[1])
        try:
            step = np.linalg.solve(_reduced_jacobian(x[0], x[1], config), -g)
        except np.linalg.LinAlgError:
            return None
        lam = 1.0
        for _ in range(40):
            trial = x + lam * step
            if trial[0] > 0.0 and trial[1] > 0.0:
                break
            lam *= 0.5
        else:
            return None
        x = x + lam * step
        if not np.isfinite(x).all():
            return None
    g = _reduced(x[0], x[1], config)
    if max(abs(g[0]), abs(g[1])) < tol:
        return float(x[0]), float(x[1])
    return None


def _dedupe(roots: Iterable[tuple[float, float]], radius: float) -> list[tuple[float, float]]:
    kept: list[tuple[float, float]] = []
    for r in sorted(roots):
        if all(math.hypot(r[0] - k[0], r[1] - k[1]) > radius for k in kept):
            kept.append(r)
    return kept


def _mixed_sign_cells(g: np.ndarray) -> np.ndarray:
    """Boolean (n-1, n-1) mask: cells whose four corners change sign in g."""
    c = np.minimum.reduce([g[:-1, :-1], g[1:, :-1], g[:-1, 1:], g[1:, 1:]])
    d = np.maximum.reduce([g[:-1, :-1], g[1:, :-1], g[:-1, 1:], g[1:, 1:]])
    return (c <= 0.0) & (d >= 0.0)


def _lattice(settings: ContinuationSettings, config: TrapConfig) -> np.ndarray:
    # Quadratic grading: dense near zero, where new roots enter through the
    # alpha = 0 boundary, coarse near the box edge.
    amax = settings.box_limit(config)
    t = np.arange(1, settings.n_grid + 1) / settings.n_grid
    return amax * t**2


def find_all_roots(
    config: TrapConfig, settings: ContinuationSettings | None = None
) -> list[StationaryPoint]:
    """Every distinct stationary solution at this configuration.

    Multi-start Newton on the reduced system, seeded from every cell of a
    graded lattice over (0, alpha_max]² where both reduced equations change
    sign.  Returns points sorted by (alpha1, alpha2); an empty list is a
    valid outcome (instability gap).
    """
    if config.dim != 2:
        raise ValueError("stationary analysis is two-dimensional only")
    settings = settings or ContinuationSettings()
    nodes = _lattice(settings, config)
    x1, x2 = np.meshgrid(nodes, nodes, indexing="ij")
    g1, g2 = _reduced(x1, x2, config)
    cells = _mixed_sign_cells(g1) & _mixed_sign_cells(g2)
    idx1, idx2 = np.nonzero(cells)
    centers1 = 0.5 * (nodes[idx1] + nodes[idx1 + 1])
    centers2 = 0.5 * (nodes[idx2] + nodes[idx2 + 1])

    amax = settings.box_limit(config)
    converged: list[tuple[float, float]] = []
    for c1, c2 in zip(centers1, centers2):
        hit = _newton_reduced(c1, c2, config, settings.newton_tol, settings.newton_max_iter)
        if hit is None:
            continue
        a1, a2 = hit
        if 0.0 < a1 <= 1.5 * amax and 0.0 < a2 <= 1.5 * amax:
            converged.append((a1, a2))

    out = []
    for a1, a2 in _dedupe(converged, settings.dedupe_radius):
        beta = _beta_of(a1, a2, config.Omega)
        out.append(
            StationaryPoint(
                alpha1=a1,
                alpha2=a2,
                beta=beta,
                Omega=config.Omega,
                residual=_max_residual(a1, a2, beta, config),
            )
        )
    return out


def brute_force_roots(
    config: TrapConfig,
    settings: ContinuationSettings | None = None,
    cell_tol: float = 1e-8,
    max_cells: int = 500_000,
) -> list[tuple[float, float]]:
    """Exhaustive bisection-on-sign-change oracle; no Newton anywhere.

    Starts from a uniform lattice over (0, alpha_max]² and recursively
    quadrisects every cell where both reduced equations change sign, until
    the cell diagonal drops below ``cell_tol``.  Returns accepted cell
    centres (deduplicated).  Slow by design; meant to cross-check
    :func:`find_all_roots` at a handful of configurations, not for scans.
    """
    settings = settings or ContinuationSettings()
    amax = settings.box_limit(config)
    n0 = settings.n_grid
    eps = amax / n0 * 1e-6
    xs = np.linspace(eps, amax, n0 + 1)

    x1, x2 = np.meshgrid(xs, xs, indexing="ij")
    g1, g2 = _reduced(x1, x2, config)
    mask = _mixed_sign_cells(g1) & _mixed_sign_cells(g2)
    idx1, idx2 = np.nonzero(mask)
    stack = [
        (xs[i], xs[i + 1], xs[j], xs[j + 1]) for i, j in zip(idx1, idx2)
    ]

    accepted: list[tuple[float, float]] = []
    visited = 0
    while stack:
        lo1, hi1, lo2, hi2 = stack.pop()
        visited += 1
        if visited > max_cells:
            raise RuntimeError("brute-force oracle exceeded its cell budget")
        if math.hypot(hi1 - lo1, hi2 - lo2) < cell_tol:
            accepted.append((0.5 * (lo1 + hi1), 0.5 * (lo2 + hi2)))
            continue
        mid1, mid2 = 0.5 * (lo1 + hi1), 0.5 * (lo2 + hi2)
        corners1 = np.array([lo1, mid1, hi1])
        corners2 = np.array([lo2, mid2, hi2])
        c1, c2 = np.meshgrid(corners1, corners2, indexing="ij")
        G1, G2 = _reduced(c1, c2, config)
        for i in range(2):
            for j in range(2):
                sub1 = G1[i : i + 2, j : j + 2]
                sub2 = G2[i : i + 2, j : j + 2]
                if (
                    sub1.min() <= 0.0 <= sub1.max()
                    and sub2.min() <= 0.0 <= sub2.max()
                ):
                    stack.append(
                        (corners1[i], corners1[i + 1], corners2[j], corners2[j + 1])
                    )

    merged = _dedupe(accepted, max(10.0 * cell_tol, 1e-7))
    return [(a1, a2) for a1, a2 in merged]


# ---------------------------------------------------------------------------
# Pseudo-arclength continuation in (alpha1, alpha2, Omega).
# ---------------------------------------------------------------------------


def _grad3(a1: float, a2: float, config: TrapConfig) -> np.ndarray:
    """Gradients of (g1, g2) with respect to (alpha1, alpha2, Omega); 2x3."""
    Om, b = config.Omega, config.b
    s = a1 + a2
    beta = _beta_of(a1, a2, Om)
    db_da1 = 2.0 * Om * a2 / s**2
    db_da2 = -2.0 * Om * a1 / s**2
    db_dom = (a1 - a2) / s
    return np.array(
        [
            [(2.0 * beta + 2.0 * Om) * db_da1 - 2.0 * a1 + 2.0 * b,
             (2.0 * beta + 2.0 * Om) * db_da2,
             (2.0 * beta + 2.0 * Om) * db_dom + 2.0 * beta],
            [(2.0 * beta - 2.0 * Om) * db_da1,
             (2.0 * beta - 2.0 * Om) * db_da2 - 2.0 * a2 + 2.0 * b,
             (2.0 * beta - 2.0 * Om) * db_dom - 2.0 * beta],
        ]
    )


def _arc_tangent(x: np.ndarray, config0: TrapConfig) -> np.ndarray:
    rows = _grad3(x[0], x[1], config0.with_rotation(x[2]))
    tau = np.cross(rows[0], rows[1])
    norm = np.linalg.norm(tau)
    if norm < 1e-14:
        raise np.linalg.LinAlgError("degenerate tangent")
    return tau / norm


def _arc_correct(
    x_pred: np.ndarray, tau: np.ndarray, config0: TrapConfig, tol: float, max_iter: int
) -> np.ndarray | None:
    x = x_pred.copy()
    for _ in range(max_iter):
        cfg = config0.with_rotation(x[2])
        g1, g2 = _reduced(x[0], x[1], cfg)
        h = tau @ (x - x_pred)
        f = np.array([g1, g2, h])
        if np.abs(f).max() < tol:
            return x
        jac = np.vstack([_grad3(x[0], x[1], cfg), tau])
        try:
            x = x + np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError:
            return None
        if x[0] <= 0.0 or x[1] <= 0.0 or x[2] < 0.0 or not np.isfinite(x).all():
            return None
    return None


def _arc_trace(
    start: StationaryPoint,
    config0: TrapConfig,
    settings: ContinuationSettings,
    omega_sign: float,
    omega_stop: float,
    max_steps: int = 2000,
) -> list[np.ndarray]:
    """Follow the solution curve from ``start``, initially moving in the
    direction of ``omega_sign``; stop once Omega crosses ``omega_stop`` after
    folding back, or the curve leaves the admissible box."""
    x = np.array([start.alpha1, start.alpha2, start.Omega])
    tau = _arc_tangent(x, config0)
    if tau[2] * omega_sign < 0.0:
        tau = -tau
    path = [x.copy()]
    h = settings.arc_step
    for _ in range(max_steps):
        x_pred = x + h * tau
        x_new = _arc_correct(x_pred, tau, config0, settings.newton_tol * 100.0, 30)
        if x_new is None:
            if h > settings.arc_step / 64.0:
                h *= 0.5
                continue
            break
        tau_new = _arc_tangent(x_new, config0)
        if tau_new @ tau < 0.0:
            tau_new = -tau_new
        x, tau = x_new, tau_new
        path.append(x.copy())
        if h < settings.arc_step:
            h = min(settings.arc_step, h * 2.0)
        # Terminate once we have folded back past the stop line.
        if omega_sign > 0.0 and tau[2] < 0.0 and x[2] < omega_stop:
            break
        if omega_sign < 0.0 and tau[2] > 0.0 and x[2] > omega_stop:
            break
        if x[2] > config0.Omega + 10.0 or x[2] < 0.0:
            break
    return path


def _refine_fold(
    seed: np.ndarray, config0: TrapConfig, tol: float = 1e-12, max_iter: int = 60
) -> np.ndarray | None:
    """Newton on (g1, g2, det of the reduced Jacobian) = 0 in (a1, a2, Omega)."""

    def system(x: np.ndarray) -> np.ndarray:
        cfg = config0.with_rotation(x[2])
        g1, g2 = _reduced(x[0], x[1], cfg)
        det = float(np.linalg.det(_reduced_jacobian(x[0], x[1], cfg)))
        return np.array([g1, g2, det])

    x = seed.copy()
    h = 1e-7
    for _ in range(max_iter):
        f = system(x)
        if np.abs(f).max() < tol:
            return x
        jac = np.empty((3, 3))
        for k in range(3):
            dx = np.zeros(3)
            dx[k] = h * max(1.0, abs(x[k]))
            jac[:, k] = (system(x + dx) - system(x - dx)) / (2.0 * dx[k])
        try:
            step = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError:
            return None
        x = x + step
        if x[0] <= 0.0 or x[1] <= 0.0 or not np.isfinite(x).all():
            return None
    return x if np.abs(system(x)).max() < 1e-9 else None


# ---------------------------------------------------------------------------
# Branch tracing over a grid of rotation rates.
# ---------------------------------------------------------------------------

_LINK_CAP = 0.25  # max (alpha1, alpha2, beta) distance for grid-to-grid linking


def _link_roots(
    active: dict[int, StationaryPoint],
    roots: list[StationaryPoint],
    dedupe_radius: float,
) -> tuple[dict[int, StationaryPoint], list[StationaryPoint]]:
    """Greedy nearest-neighbour matching of new roots to active branches."""
    pairs = []
    for bid, last in active.items():
        for j, r in enumerate(roots):
            d = math.sqrt(
                (last.alpha1 - r.alpha1) ** 2
                + (last.alpha2 - r.alpha2) ** 2
                + (last.beta - r.beta) ** 2
            )
            if d <= _LINK_CAP:
                pairs.append((d, bid, j))
    pairs.sort(key=lambda p: p[0])

    matched: dict[int, StationaryPoint] = {}
    used_roots: set[int] = set()
    by_branch: dict[int, list[float]] = {}
    for d, bid, j in pairs:
        by_branch.setdefault(bid, []).append(d)
    for d, bid, j in pairs:
        if bid in matched or j in used_roots:
            continue
        rivals = [x for x in by_branch[bid] if x != d]
        if rivals and min(rivals) - d < dedupe_radius and min(rivals) > d:
            raise BranchAmbiguity(
                f"two links for branch {bid} at Omega={roots[j].Omega:.6g} "
                f"differ by less than the dedupe radius"
            )
        matched[bid] = replace(roots[j], branch_id=bid)
        used_roots.add(j)
    unmatched = [r for j, r in enumerate(roots) if j not in used_roots]
    return matched, unmatched


def _pair_folds(
    ended: list[StationaryPoint],
    born: list[StationaryPoint],
    config0: TrapConfig,
    settings: ContinuationSettings,
    omega_prev: float,
    omega_next: float,
) -> list[FoldEvent]:
    """Confirm fold connections among branches that ended (or started)
    together at one grid step, and refine each fold location."""
    events: list[FoldEvent] = []
    group = ended if ended else born
    sign = 1.0 if ended else -1.0
    stop = omega_prev if ended else omega_next
    claimed: set[int] = set()
    for i, p in enumerate(group):
        if i in claimed:
            continue
        try:
            path = _arc_trace(p, config0, settings, sign, stop)
        except np.linalg.LinAlgError:
            continue
        if len(path) < 3:
            continue
        end = path[-1]
        # Which other terminated/born branch does the curve reconnect to?
        partner = None
        for j, q in enumerate(group):
            if j == i or j in claimed:
                continue
            if math.hypot(end[0] - q.alpha1, end[1] - q.alpha2) < 10.0 * settings.arc_step:
                partner = j
                break
        if partner is None:
            continue
        omegas = [x[2] for x in path]
        turn = path[int(np.argmax(omegas))] if ended else path[int(np.argmin(omegas))]
        refined = _refine_fold(turn, config0)
        if refined is None:
            continue
        a1, a2, om = refined
        events.append(
            FoldEvent(
                Omega=float(om),
                alpha1=float(a1),
                alpha2=float(a2),
                beta=float(_beta_of(a1, a2, om)),
                branch_ids=(group[i].branch_id, group[partner].branch_id),
            )
        )
        claimed.add(i)
        claimed.add(partner)
    return events


def trace_branches(
    config: TrapConfig, settings: ContinuationSettings | None = None
) -> BranchScan:
    """Scan rotation rates, collect all roots, and link them into branches.

    The Omega field of ``config`` is ignored; the scan grid comes from
    ``settings``.  Fold events (two branches meeting at a turning point) are
    located to Newton accuracy and recorded on the returned scan.
    """
    settings = settings or ContinuationSettings()
    grid = np.linspace(settings.omega_min, settings.omega_max, settings.n_omega)

    all_points: list[StationaryPoint] = []
    multiplicity = np.zeros(len(grid), dtype=int)
    active: dict[int, StationaryPoint] = {}
    next_id = 0
    ended_at: list[tuple[int, list[StationaryPoint]]] = []
    born_at: list[tuple[int, list[StationaryPoint]]] = []

    for i, om in enumerate(grid):
        cfg = config.with_rotation(float(om))
        roots = find_all_roots(cfg, settings)
        multiplicity[i] = len(roots)

        matched, unmatched = _link_roots(active, roots, settings.dedupe_radius)
        lost = [active[bid] for bid in active if bid not in matched]
        if lost and i > 0:
            ended_at.append((i, lost))
        newly = []
        for r in unmatched:
            newly.append(replace(r, branch_id=next_id))
            next_id += 1
        if newly and i > 0:
            born_at.append((i, newly))

        active = {p.branch_id: p for p in list(matched.values()) + newly}
        all_points.extend(active.values())

    folds: list[FoldEvent] = []
    for i, lost in ended_at:
        if len(lost) >= 2:
            folds.extend(
                _pair_folds(lost, [], config, settings, grid[i - 1], grid[i])
            )
    for i, newly in born_at:
        if len(newly) >= 2:
            folds.extend(
                _pair_folds([], newly, config, settings, grid[i - 1], grid[i])
            )

    return BranchScan(
        config=config,
        omega_grid=grid,
        points=tuple(all_points),
        multiplicity=multiplicity,
        folds=tuple(sorted(folds, key=lambda f: f.Omega)),
    )


def bracket_multiplicity_change(
    config: TrapConfig,
    omega_lo: float,
    omega_hi: float,
    settings: ContinuationSettings | None = None,
    xtol: float = 1e-6,
) -> tuple[float, float]:
    """Bisect on the root count of find_all_roots until the bracket width
    drops below ``xtol``.  Requires different counts at the two endpoints."""
    settings = settings or ContinuationSettings()
    n_lo = len(find_all_roots(config.with_rotation(omega_lo), settings))
    n_hi = len(find_all_roots(config.with_rotation(omega_hi), settings))
    if n_lo == n_hi:
        raise ValueError(
            f"multiplicity is {n_lo} at both endpoints; nothing to bracket"
        )
    lo, hi = float(omega_lo), float(omega_hi)
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        n_mid = len(find_all_roots(config.with_rotation(mid), settings))
        if n_mid == n_lo:
            lo = mid
        else:
            hi = mid
    return lo, hi


def certify_fold_bracket(
    config: TrapConfig,
    fold: FoldEvent,
    settings: ContinuationSettings | None = None,
    width: float = 1e-6,
) -> bool:
    """Check that the two coalescing roots exist on exactly one side of the
    fold at distance ``width`` in Omega, by polishing from perturbed seeds."""
    settings = settings or ContinuationSettings()
    cfg_at = lambda om: config.with_rotation(om)

    jac = _reduced_jacobian(fold.alpha1, fold.alpha2, cfg_at(fold.Omega))
    _, _, vt = np.linalg.svd(jac)
    v = vt[-1]
    delta = 2.0 * math.sqrt(width) * v

    def distinct_roots(om: float) -> int:
        found = []
        for sgn in (+1.0, -1.0):
            seed = np.array([fold.alpha1, fold.alpha2]) + sgn * delta
            if seed[0] <= 0.0 or seed[1] <= 0.0:
                continue
            hit = _newton_reduced(seed[0], seed[1], cfg_at(om), settings.newton_tol, 60)
            if hit is not None and all(
                math.hypot(hit[0] - f[0], hit[1] - f[1]) > width for f in found
            ):
                found.append(hit)
        return len(found)

    lo = distinct_roots(fold.Omega - width)
    hi = distinct_roots(fold.Omega + width)
    return (lo, hi) in ((2, 0), (0, 2))


def write_branch_scan_csv(scan: BranchScan, path: str | Path) -> None:
    """One row per (Omega, root); 17 significant digits."""
    mult_at = {float(om): int(m) for om, m in zip(scan.omega_grid, scan.multiplicity)}
    rows = sorted(scan.points, key=lambda p: (p.Omega, p.branch_id))
    buf = io.StringIO()
    buf.write("Omega,branch_id,alpha1,alpha2,beta,residual,stability,multiplicity\n")
    for p in rows:
        stab = "" if p.stability is None else str(p.stability)
        buf.write(
            f"{p.Omega:.16e},{p.branch_id},{p.alpha1:.16e},{p.alpha2:.16e},"
            f"{p.beta:.16e},{p.residual:.16e},{stab},{mult_at[p.Omega]}\n"
        )
    Path(path).write_text(buf.getvalue())
