"""Command-line driver for scans, integrations and stability reports.

Four subcommands: ``stationary-scan`` traces all stationary solutions over a
rotation-rate interval; ``evolve-ode`` integrates the wave-packet parameter
equations; ``evolve-pde`` runs the spectral solver; ``stability`` computes
spectra for the shape and centre-of-mass subsystems.

Configuration is resolved in order of increasing precedence: command
defaults, then ``--preset``, then a ``--config`` file of ``key = value``
lines, then explicit command-line flags.  The fully resolved configuration
is echoed into the output directory as ``resolved_config.txt``.  All
algorithms are deterministic, so identical resolved configurations produce
byte-identical CSV output.

Each command writes delimited data plus rendered figures (suppress the
latter with ``--no-plot``).  Exit codes: 0 success, 2 invalid
configuration, 3 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from pathlib import Path

import numpy as np

from .core import GaussonState, StationaryPoint, TrapConfig
from .errors import SolverError
from .gausson_ode import OdeMethod, OdeSettings, integrate
from .pde import (
    Frame,
    Grid2D,
    PdeSettings,
    evolve,
    gausson_field,
    strang_order,
    write_field,
    write_pde_csv,
)
from .stability import STAB_TOL, classify, classify_scan, com_spectrum, write_spectra_csv
from .stationary import (
    ContinuationSettings,
    bracket_multiplicity_change,
    certify_fold_bracket,
    find_all_roots,
    residual,
    trace_branches,
    write_branch_scan_csv,
)

PRESETS = {
    "fig1": {"omega1": math.sqrt(2.0 / 3.0), "omega2": math.sqrt(4.0 / 3.0), "b": 0.0},
    "fig2": {"omega1": math.sqrt(2.0 / 3.0), "omega2": math.sqrt(4.0 / 3.0), "b": 1.0},
    "fig3": {"omega1": math.sqrt(2.0 / 3.0), "omega2": math.sqrt(4.0 / 3.0), "b": -1.0},
}

_TRAP_DEFAULTS = {
    "omega1": math.sqrt(2.0 / 3.0),
    "omega2": math.sqrt(4.0 / 3.0),
    "b": 0.0,
}


# ---------------------------------------------------------------------------
# Configuration resolution
# ---------------------------------------------------------------------------


def _parse_config_file(path: str) -> dict[str, object]:
    out: dict[str, object] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        value = value.strip()
        try:
            out[key] = int(value)
        except ValueError:
            try:
                out[key] = float(value)
            except ValueError:
                out[key] = value
    return out


def _resolve(args: argparse.Namespace, defaults: dict[str, object]) -> dict[str, object]:
    """Merge defaults < preset < config file < explicit flags."""
    preset_cfg: dict[str, object] = {}
    if getattr(args, "preset", None):
        preset_cfg = PRESETS[args.preset]
    file_cfg: dict[str, object] = {}
    if getattr(args, "config", None):
        file_cfg = _parse_config_file(args.config)
        unknown = set(file_cfg) - set(defaults)
        if unknown:
            raise ValueError(
                f"unknown configuration key(s) for this command: {', '.join(sorted(unknown))}"
            )
    resolved = dict(defaults)
    resolved.update({k: v for k, v in preset_cfg.items() if k in defaults})
    resolved.update(file_cfg)
    for key in defaults:
        cli_val = getattr(args, key, None)
        if cli_val is not None:
            resolved[key] = cli_val
    return resolved


def _fmt_value(v: object) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    if v is None:
        return "none"
    return str(v)


def _echo_config(resolved: dict[str, object], out_dir: Path, command: str) -> None:
    lines = [f"command = {command}"]
    lines += [f"{k} = {_fmt_value(resolved[k])}" for k in sorted(resolved)]
    (out_dir / "resolved_config.txt").write_text("\n".join(lines) + "\n")


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_pair(text: str, name: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError(f"{name} expects two comma-separated numbers, got {text!r}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError as exc:
        raise ValueError(f"{name}: {exc}") from exc


def _initial_state(resolved: dict[str, object], trap: TrapConfig) -> GaussonState:
    """Initial wave packet from explicit matrix entries, or from a stationary
    solution at the configured rotation rate (the default)."""
    explicit = resolved["a11"] is not None or resolved["a22"] is not None
    if explicit and resolved["from_stationary"]:
        raise ValueError("give either --from-stationary or explicit A entries, not both")
    if explicit:
        if resolved["a11"] is None or resolved["a22"] is None:
            raise ValueError("an explicit initial state needs both a11 and a22")
        A = np.array(
            [[resolved["a11"], resolved["a12"]], [resolved["a12"], resolved["a22"]]],
            dtype=float,
        )
        B = np.array(
            [[resolved["b11"], resolved["b12"]], [resolved["b12"], resolved["b22"]]],
            dtype=float,
        )
        xi = _parse_pair(str(resolved["xi"]), "xi")
        pi = _parse_pair(str(resolved["pi"]), "pi")
        amp = resolved["amp"]
        if amp is None:
            amp = float(np.linalg.det(A)) ** 0.25 / math.sqrt(math.pi)
        return GaussonState.from_matrices(
            A, B, xi=xi, pi=pi, N=float(amp), f=float(resolved["phase"])
        )
    roots = find_all_roots(trap, ContinuationSettings())
    if not roots:
        raise ValueError(
            f"no stationary solution at Omega={trap.Omega:g}; "
            "give an explicit initial state (a11, a22, ...)"
        )
    idx = int(resolved["root_index"])
    if not 0 <= idx < len(roots):
        raise ValueError(
            f"root_index {idx} out of range; {len(roots)} root(s) at Omega={trap.Omega:g}"
        )
    return roots[idx].as_gausson_state()


_INITIAL_DEFAULTS: dict[str, object] = {
    "from_stationary": False,
    "root_index": 0,
    "a11": None,
    "a22": None,
    "a12": 0.0,
    "b11": 0.0,
    "b22": 0.0,
    "b12": 0.0,
    "xi": "0,0",
    "pi": "0,0",
    "amp": None,
    "phase": 0.0,
}


def _add_initial_state_flags(sub: argparse.ArgumentParser) -> None:
    grp = sub.add_argument_group("initial state")
    grp.add_argument("--from-stationary", action="store_true", default=False,
                     dest="from_stationary",
                     help="start from a stationary solution at --omega (default "
                          "behaviour when no explicit entries are given)")
    grp.add_argument("--root-index", type=int, dest="root_index",
                     help="which stationary root, ordered by (alpha1, alpha2)")
    for name in ("a11", "a22", "a12", "b11", "b22", "b12"):
        grp.add_argument(f"--{name}", type=float, help=f"initial {name.upper()} entry")
    grp.add_argument("--xi", help="initial centre position, e.g. 0.3,-0.2")
    grp.add_argument("--pi", help="initial centre momentum, e.g. 0.1,0.4")
    grp.add_argument("--amp", type=float, help="amplitude N (default: unit norm)")
    grp.add_argument("--phase", type=float, help="global phase f")


def _add_common_flags(sub: argparse.ArgumentParser, with_omega: bool = True) -> None:
    sub.add_argument("--omega1", type=float, help="first trap frequency")
    sub.add_argument("--omega2", type=float, help="second trap frequency")
    sub.add_argument("--b", type=float, help="nonlinearity strength (positive attracts)")
    if with_omega:
        sub.add_argument("--omega", type=float, help="rotation rate")
    sub.add_argument("--preset", choices=sorted(PRESETS),
                     help="trap/nonlinearity presets")
    sub.add_argument("--config", help="key = value configuration file")
    sub.add_argument("--out", default="out", help="output directory (default: out)")
    sub.add_argument("--no-plot", action="store_true", default=False, dest="no_plot",
                     help="skip figure rendering")


# ---------------------------------------------------------------------------
# stationary-scan
# ---------------------------------------------------------------------------

_SCAN_DEFAULTS: dict[str, object] = {
    **_TRAP_DEFAULTS,
    "omega_min": 0.0,
    "omega_max": 2.0,
    "n_omega": 801,
    "n_grid": 400,
    "newton_tol": 1e-12,
    "dedupe_radius": 1e-6,
    "arc_step": 0.01,
    "alpha_max": None,
    "stab_tol": STAB_TOL,
}


def _multiplicity_intervals(grid: np.ndarray, mult: np.ndarray) -> list[tuple[float, float, int]]:
    intervals = []
    start = 0
    for i in range(1, len(grid) + 1):
        if i == len(grid) or mult[i] != mult[start]:
            intervals.append((float(grid[start]), float(grid[i - 1]), int(mult[start])))
            start = i
    return intervals


def cmd_stationary_scan(args: argparse.Namespace) -> int:
    resolved = _resolve(args, _SCAN_DEFAULTS)
    out = _out_dir(args)
    _echo_config(resolved, out, "stationary-scan")

    trap = TrapConfig(
        omega1=float(resolved["omega1"]),
        omega2=float(resolved["omega2"]),
        b=float(resolved["b"]),
    )
    settings = ContinuationSettings(
        omega_min=float(resolved["omega_min"]),
        omega_max=float(resolved["omega_max"]),
        n_omega=int(resolved["n_omega"]),
        n_grid=int(resolved["n_grid"]),
        newton_tol=float(resolved["newton_tol"]),
        dedupe_radius=float(resolved["dedupe_radius"]),
        arc_step=float(resolved["arc_step"]),
        alpha_max=None if resolved["alpha_max"] is None else float(resolved["alpha_max"]),
    )
    scan = trace_branches(trap, settings)
    scan = classify_scan(scan, stab_tol=float(resolved["stab_tol"]))
    write_branch_scan_csv(scan, out / "branch_scan.csv")

    lines = [
        f"trap: omega1={trap.omega1:.10g}  omega2={trap.omega2:.10g}  b={trap.b:g}",
        f"scan: {settings.n_omega} rotation rates on "
        f"[{settings.omega_min:g}, {settings.omega_max:g}]",
        "",
        "multiplicity intervals (grid resolution "
        f"{(settings.omega_max - settings.omega_min) / (settings.n_omega - 1):.2e}):",
    ]
    intervals = _multiplicity_intervals(scan.omega_grid, scan.multiplicity)
    for lo, hi, m in intervals:
        lines.append(f"  [{lo:.6f}, {hi:.6f}]  ->  {m} solution(s)")
    lines.append("")
    lines.append("multiplicity transitions (bisected to 1e-6 in Omega):")
    for (lo_a, hi_a, m_a), (lo_b, hi_b, m_b) in zip(intervals, intervals[1:]):
        blo, bhi = bracket_multiplicity_change(trap, hi_a, lo_b, settings, xtol=1e-6)
        lines.append(f"  {m_a} -> {m_b} inside [{blo:.8f}, {bhi:.8f}]")
    lines.append("")
    if scan.folds:
        lines.append("fold points (two branches meet; Newton-refined):")
        for fold in scan.folds:
            ok = certify_fold_bracket(trap, fold, settings, width=1e-6)
            tag = "certified" if ok else "NOT certified"
            lines.append(
                f"  Omega = {fold.Omega:.9f}  (bracket +-1e-6 {tag})  "
                f"alpha1={fold.alpha1:.6f} alpha2={fold.alpha2:.6f} "
                f"branches {fold.branch_ids[0]} <-> {fold.branch_ids[1]}"
            )
    else:
        lines.append("fold points: none detected")
    lines.append("")
    lines.append("shape stability per branch:")
    for bid in scan.branch_ids:
        pts = scan.branch(bid)
        counts: dict[str, int] = {}
        for p in pts:
            counts[str(p.stability)] = counts.get(str(p.stability), 0) + 1
        span = f"[{pts[0].Omega:.4f}, {pts[-1].Omega:.4f}]"
        breakdown = ", ".join(f"{k}: {v}" for k, v in sorted(counts.items()))
        lines.append(f"  branch {bid} on {span}: {breakdown}")

    summary = "\n".join(lines) + "\n"
    (out / "summary.txt").write_text(summary)
    print(summary, end="")

    if not args.no_plot:
        from .plotting import plot_branch_scan

        plot_branch_scan(scan, out / "fig_branches.png")
    return 0


# ---------------------------------------------------------------------------
# evolve-ode
# ---------------------------------------------------------------------------

_ODE_DEFAULTS: dict[str, object] = {
    **_TRAP_DEFAULTS,
    "omega": 0.0,
    "method": "rk45",
    "dt": 1e-3,
    "t_end": 10.0,
    "rel_tol": 1e-10,
    "abs_tol": 1e-12,
    "sample_every": 10,
    **_INITIAL_DEFAULTS,
}


def _growth_exponent(times: np.ndarray, dev: np.ndarray) -> float | None:
    """Least-squares slope of log(deviation) on the second half of the run,
    or None when the deviation never grew past roundoff scale."""
    mask = dev > 0.0
    if mask.sum() < 4 or dev[-1] < 1e-9 or dev[-1] < 10.0 * dev[mask][0]:
        return None
    half = times > 0.5 * times[-1]
    sel = mask & half
    if sel.sum() < 2:
        return None
    slope = np.polyfit(times[sel], np.log(dev[sel]), 1)[0]
    return float(slope)


def cmd_evolve_ode(args: argparse.Namespace) -> int:
    resolved = _resolve(args, _ODE_DEFAULTS)
    out = _out_dir(args)
    _echo_config(resolved, out, "evolve-ode")

    trap = TrapConfig(
        omega1=float(resolved["omega1"]),
        omega2=float(resolved["omega2"]),
        Omega=float(resolved["omega"]),
        b=float(resolved["b"]),
    )
    method_names = {m.value: m for m in OdeMethod}
    method = str(resolved["method"]).lower()
    if method not in method_names:
        raise ValueError(f"method must be one of {sorted(method_names)}, got {method!r}")
    settings = OdeSettings(
        t_end=float(resolved["t_end"]),
        dt=float(resolved["dt"]),
        method=method_names[method],
        rel_tol=float(resolved["rel_tol"]),
        abs_tol=float(resolved["abs_tol"]),
        sample_every=int(resolved["sample_every"]),
    )
    initial = _initial_state(resolved, trap)
    traj = integrate(initial, trap, settings)
    traj.to_csv(out / "trajectory.csv")

    dev = np.array(
        [
            math.sqrt(
                float(((s.a_upper - initial.a_upper) ** 2).sum())
                + float(((s.b_upper - initial.b_upper) ** 2).sum())
            )
            for s in traj.samples
        ]
    )
    lines = [
        f"integrated to t={traj.final.t:g} with {settings.method.value} "
        f"({len(traj.samples)} samples)",
        f"norm drift     : {abs(traj.norm[-1] - traj.norm[0]) / traj.norm[0]:.3e} (relative)",
        f"energy drift   : {abs(traj.energy[-1] - traj.energy[0]) / max(abs(traj.energy[0]), 1e-300):.3e} (relative)",
        f"max |A,B - initial| : {dev.max():.3e}",
        f"min eig(A)     : {traj.min_eig_a.min():.3e}",
    ]
    rate = _growth_exponent(traj.times - traj.times[0], dev)
    if rate is not None:
        lines.append(f"deviation growth exponent ~ {rate:.4f} (log-linear fit)")
    summary = "\n".join(lines) + "\n"
    (out / "ode_summary.txt").write_text(summary)
    print(summary, end="")

    if not args.no_plot:
        from .plotting import plot_trajectory

        plot_trajectory(traj, out / "fig_trajectory.png")
    return 0


# ---------------------------------------------------------------------------
# evolve-pde
# ---------------------------------------------------------------------------

_PDE_DEFAULTS: dict[str, object] = {
    **_TRAP_DEFAULTS,
    "omega": 0.0,
    "n": 256,
    "box": 12.0,
    "dt": 1e-3,
    "t_end": 1.0,
    "log_epsilon": 1e-30,
    "frame": "lab",
    "sample_every": 10,
    "store_every": 0,
    "snapshot_every": 0,
    **_INITIAL_DEFAULTS,
}


def cmd_evolve_pde(args: argparse.Namespace) -> int:
    resolved = _resolve(args, _PDE_DEFAULTS)
    out = _out_dir(args)
    _echo_config(resolved, out, "evolve-pde")

    trap = TrapConfig(
        omega1=float(resolved["omega1"]),
        omega2=float(resolved["omega2"]),
        Omega=float(resolved["omega"]),
        b=float(resolved["b"]),
    )
    grid = Grid2D(n=int(resolved["n"]), L=float(resolved["box"]))
    frame_names = {f.value: f for f in Frame}
    frame = str(resolved["frame"]).lower()
    if frame not in frame_names:
        raise ValueError(f"frame must be one of {sorted(frame_names)}, got {frame!r}")

    state = _initial_state(resolved, trap)
    field = gausson_field(state, grid)

    if args.dt_study:
        study_settings = PdeSettings(
            dt=2e-3, t_end=0.4, log_epsilon=float(resolved["log_epsilon"]),
            frame=frame_names[frame],
        )
        orders, errors = strang_order(field, trap, study_settings)
        lines = ["dt-refinement study (terminal-state L2 error vs dt/4 reference):"]
        dts = (2e-3, 1e-3, 5e-4, 2.5e-4)
        for dt_k, err in zip(dts, errors):
            lines.append(f"  dt = {dt_k:.1e}   error = {err:.6e}")
        lines.append(
            "observed convergence order: "
            + ", ".join(f"{o:.3f}" for o in orders)
        )
        text = "\n".join(lines) + "\n"
        (out / "dt_study.txt").write_text(text)
        print(text, end="")
        return 0

    settings = PdeSettings(
        dt=float(resolved["dt"]),
        t_end=float(resolved["t_end"]),
        log_epsilon=float(resolved["log_epsilon"]),
        frame=frame_names[frame],
        sample_every=int(resolved["sample_every"]),
        store_every=int(resolved["store_every"]),
    )

    snapshot_every = int(resolved["snapshot_every"])
    snap_dir = out / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    counter = {"k": 0}

    def observer(f):
        if snapshot_every > 0 and counter["k"] % snapshot_every == 0:
            write_field(f, snap_dir / f"field_{counter['k']:06d}.bin")
        counter["k"] += 1

    traj = evolve(field, trap, settings, observer=observer)
    write_field(traj.samples[0], snap_dir / "field_initial.bin")
    write_field(traj.final, snap_dir / "field_final.bin")
    write_pde_csv(traj, out / "pde_diagnostics.csv")

    lines = [
        f"evolved to t={traj.times[-1]:g} on a {grid.n}x{grid.n} grid (L={grid.L:g})",
        f"norm drift     : {abs(traj.norm[-1] - traj.norm[0]) / traj.norm[0]:.3e} (relative)",
        f"energy drift   : {abs(traj.energy[-1] - traj.energy[0]) / max(abs(traj.energy[0]), 1e-300):.3e} (relative)",
        f"fidelity vs fitted Gaussian: min {traj.fidelity_vs_gausson.min():.9f}",
        f"final covariance: xx={traj.cov_xx[-1]:.6f} yy={traj.cov_yy[-1]:.6f} "
        f"xy={traj.cov_xy[-1]:.6f} ({settings.frame.value} frame)",
    ]
    summary = "\n".join(lines) + "\n"
    (out / "pde_summary.txt").write_text(summary)
    print(summary, end="")

    if not args.no_plot:
        from .plotting import plot_pde_diagnostics

        plot_pde_diagnostics(traj, out / "fig_pde.png")
    return 0


# ---------------------------------------------------------------------------
# stability
# ---------------------------------------------------------------------------

_STABILITY_DEFAULTS: dict[str, object] = {
    **_TRAP_DEFAULTS,
    "omega": None,
    "omega_min": 0.0,
    "omega_max": 2.0,
    "n_omega": 801,
    "stab_tol": STAB_TOL,
    "scan": None,
}


def _bisect_flip(predicate, lo: float, hi: float, xtol: float = 1e-9) -> float:
    val_lo = predicate(lo)
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        if predicate(mid) == val_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _read_scan_points(path: str, trap: TrapConfig) -> list[StationaryPoint]:
    points = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"Omega", "branch_id", "alpha1", "alpha2", "beta"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise ValueError(
                f"scan file {path} must have columns {', '.join(sorted(required))}"
            )
        for row in reader:
            om = float(row["Omega"])
            a1, a2, beta = float(row["alpha1"]), float(row["alpha2"]), float(row["beta"])
            res = max(abs(r) for r in residual((a1, a2, beta), trap.with_rotation(om)))
            points.append(
                StationaryPoint(
                    alpha1=a1, alpha2=a2, beta=beta, Omega=om,
                    residual=res, branch_id=int(row["branch_id"]),
                )
            )
    return points


def cmd_stability(args: argparse.Namespace) -> int:
    resolved = _resolve(args, _STABILITY_DEFAULTS)
    out = _out_dir(args)
    _echo_config(resolved, out, "stability")

    trap = TrapConfig(
        omega1=float(resolved["omega1"]),
        omega2=float(resolved["omega2"]),
        b=float(resolved["b"]),
    )
    stab_tol = float(resolved["stab_tol"])
    grid = np.linspace(
        float(resolved["omega_min"]), float(resolved["omega_max"]), int(resolved["n_omega"])
    )

    entries = []
    unstable_flags = []
    for om in grid:
        rep = com_spectrum(trap.with_rotation(float(om)), stab_tol)
        entries.append((float(om), None, rep))
        unstable_flags.append(rep.max_real_part > stab_tol)

    lines = [
        f"trap: omega1={trap.omega1:.10g}  omega2={trap.omega2:.10g}  b={trap.b:g}",
        "",
        "centre-of-mass classification thresholds (bisection to 1e-9):",
    ]
    def com_unstable(om: float) -> bool:
        return com_spectrum(trap.with_rotation(om), stab_tol).max_real_part > stab_tol

    found_any = False
    for i in range(1, len(grid)):
        if unstable_flags[i] != unstable_flags[i - 1]:
            om_star = _bisect_flip(com_unstable, float(grid[i - 1]), float(grid[i]))
            word = "enters" if unstable_flags[i] else "leaves"
            lines.append(f"  instability {word} at Omega = {om_star:.10f}")
            found_any = True
    if not found_any:
        lines.append("  no classification change on the scanned interval")

    omega_single = resolved["omega"]
    if omega_single is not None:
        rep = com_spectrum(trap.with_rotation(float(omega_single)), stab_tol)
        eigs = ", ".join(f"{z.real:+.6f}{z.imag:+.6f}i" for z in rep.eigenvalues)
        lines.append("")
        lines.append(
            f"centre-of-mass spectrum at Omega={float(omega_single):g}: "
            f"{eigs}  [{rep.classification}]"
        )

    if resolved["scan"] is not None:
        points = _read_scan_points(str(resolved["scan"]), trap)
        lines.append("")
        lines.append(f"shape spectra for {len(points)} scan point(s):")
        per_branch: dict[int, dict[str, int]] = {}
        for p in points:
            rep = classify(p, trap.with_rotation(p.Omega), stab_tol)
            entries.append((p.Omega, p.branch_id, rep))
            counts = per_branch.setdefault(p.branch_id, {})
            key = str(rep.classification)
            counts[key] = counts.get(key, 0) + 1
        for bid in sorted(per_branch):
            breakdown = ", ".join(f"{k}: {v}" for k, v in sorted(per_branch[bid].items()))
            lines.append(f"  branch {bid}: {breakdown}")

    write_spectra_csv(entries, out / "spectra.csv")
    report = "\n".join(lines) + "\n"
    (out / "stability_report.txt").write_text(report)
    print(report, end="")

    if not args.no_plot:
        from .plotting import plot_spectra

        plot_spectra(entries, out / "fig_stability.png")
    return 0


# ---------------------------------------------------------------------------
# Parser assembly
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="logtrap",
        description="Gaussian wave packets in a rotating trap with logarithmic "
                    "nonlinearity: stationary solutions, dynamics, stability, and "
                    "an independent spectral cross-check.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    scan = subs.add_parser("stationary-scan",
                           help="trace stationary solutions over rotation rates")
    _add_common_flags(scan, with_omega=False)
    scan.add_argument("--omega-min", type=float, dest="omega_min")
    scan.add_argument("--omega-max", type=float, dest="omega_max")
    scan.add_argument("--n-omega", type=int, dest="n_omega", help="scan grid points")
    scan.add_argument("--n-grid", type=int, dest="n_grid", help="multi-start lattice size")
    scan.add_argument("--newton-tol", type=float, dest="newton_tol")
    scan.add_argument("--dedupe-radius", type=float, dest="dedupe_radius")
    scan.add_argument("--arc-step", type=float, dest="arc_step")
    scan.add_argument("--alpha-max", type=float, dest="alpha_max")
    scan.add_argument("--stab-tol", type=float, dest="stab_tol")
    scan.set_defaults(func=cmd_stationary_scan)

    ode = subs.add_parser("evolve-ode", help="integrate the wave-packet equations")
    _add_common_flags(ode)
    ode.add_argument("--method", choices=["rk4", "rk45"])
    ode.add_argument("--dt", type=float)
    ode.add_argument("--t-end", type=float, dest="t_end")
    ode.add_argument("--rel-tol", type=float, dest="rel_tol")
    ode.add_argument("--abs-tol", type=float, dest="abs_tol")
    ode.add_argument("--sample-every", type=int, dest="sample_every")
    _add_initial_state_flags(ode)
    ode.set_defaults(func=cmd_evolve_ode)

    pde = subs.add_parser("evolve-pde", help="run the spectral solver")
    _add_common_flags(pde)
    pde.add_argument("--n", type=int, help="grid points per axis (power of two)")
    pde.add_argument("--box", type=float, help="box half-width L")
    pde.add_argument("--dt", type=float)
    pde.add_argument("--t-end", type=float, dest="t_end")
    pde.add_argument("--log-epsilon", type=float, dest="log_epsilon")
    pde.add_argument("--frame", choices=["lab", "rotating"],
                     help="frame for moment diagnostics")
    pde.add_argument("--sample-every", type=int, dest="sample_every")
    pde.add_argument("--store-every", type=int, dest="store_every",
                     help="keep every k-th sampled field in memory")
    pde.add_argument("--snapshot-every", type=int, dest="snapshot_every",
                     help="write every k-th sampled field to snapshots/")
    pde.add_argument("--dt-study", action="store_true", default=False, dest="dt_study",
                     help="run a dt-refinement convergence study and exit")
    _add_initial_state_flags(pde)
    pde.set_defaults(func=cmd_evolve_pde)

    stab = subs.add_parser("stability", help="spectra and classification")
    _add_common_flags(stab)
    stab.add_argument("--omega-min", type=float, dest="omega_min")
    stab.add_argument("--omega-max", type=float, dest="omega_max")
    stab.add_argument("--n-omega", type=int, dest="n_omega")
    stab.add_argument("--stab-tol", type=float, dest="stab_tol")
    stab.add_argument("--scan", help="branch-scan CSV whose points to classify")
    stab.set_defaults(func=cmd_stability)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
