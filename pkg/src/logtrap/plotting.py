"""Figure rendering for the CLI report path.

Every function takes computed results plus an output path, renders with the
Agg backend (no display required) and returns the path it wrote.  Figures
are companions to the CSV files, not a data source of their own.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .core import BranchScan, Stability
from .gausson_ode import Trajectory
from .pde import PdeTrajectory
from .stability import SpectrumReport, Subsystem

plt.rcParams.update({"figure.dpi": 120, "axes.grid": True, "grid.alpha": 0.3})


def plot_branch_scan(scan: BranchScan, path: str | Path) -> Path:
    """Stationary widths versus rotation rate, one colour per branch, with
    the multiplicity count underneath."""
    fig, (ax, axm) = plt.subplots(
        2, 1, figsize=(7.5, 6.5), sharex=True, height_ratios=[3, 1]
    )
    cmap = plt.get_cmap("tab10")
    for bid in scan.branch_ids:
        pts = scan.branch(bid)
        om = [p.Omega for p in pts]
        color = cmap(bid % 10)
        ax.plot(om, [p.alpha1 for p in pts], "-", color=color, lw=1.4,
                label=f"branch {bid}")
        ax.plot(om, [p.alpha2 for p in pts], "--", color=color, lw=1.4)
    for w, name in ((scan.config.omega1, r"$\omega_1$"), (scan.config.omega2, r"$\omega_2$")):
        for a in (ax, axm):
            a.axvline(w, color="gray", ls=":", lw=1.0)
        ax.annotate(name, (w, ax.get_ylim()[1]), ha="left", va="top", color="gray")
    for fold in scan.folds:
        ax.plot([fold.Omega, fold.Omega], [fold.alpha1, fold.alpha2], "k.", ms=6)
    ax.set_ylabel(r"$\alpha_1$ (solid), $\alpha_2$ (dashed)")
    ax.legend(loc="best", fontsize=8)
    axm.step(scan.omega_grid, scan.multiplicity, where="mid", color="k", lw=1.2)
    axm.set_ylabel("roots")
    axm.set_xlabel(r"rotation rate $\Omega$")
    axm.set_yticks(range(int(scan.multiplicity.max()) + 2))
    fig.suptitle(
        rf"stationary widths, $b={scan.config.b:g}$, "
        rf"$\omega_1={scan.config.omega1:.4f}$, $\omega_2={scan.config.omega2:.4f}$"
    )
    return _save(fig, path)


def plot_trajectory(traj: Trajectory, path: str | Path) -> Path:
    t = traj.times
    a = np.array([s.a_upper for s in traj.samples])
    b = np.array([s.b_upper for s in traj.samples])
    xi = np.array([s.xi for s in traj.samples])
    pi = np.array([s.pi for s in traj.samples])

    fig, axes = plt.subplots(2, 2, figsize=(9, 6), sharex=True)
    labels = ("11", "22", "12") if a.shape[1] == 3 else ("11", "22", "33", "12", "13", "23")
    for k, lab in enumerate(labels):
        axes[0, 0].plot(t, a[:, k], label=f"A{lab}")
        axes[0, 1].plot(t, b[:, k], label=f"B{lab}")
    axes[0, 0].set_ylabel("widths A")
    axes[0, 1].set_ylabel("phase curvature B")
    for ax in axes[0]:
        ax.legend(fontsize=7, ncol=2)
    for k in range(xi.shape[1]):
        axes[1, 0].plot(t, xi[:, k], label=rf"$\xi_{k + 1}$")
        axes[1, 0].plot(t, pi[:, k], "--", label=rf"$\pi_{k + 1}$")
    axes[1, 0].set_ylabel("centre of mass")
    axes[1, 0].legend(fontsize=7, ncol=2)
    axes[1, 1].plot(t, _rel_drift(traj.norm), label="norm")
    axes[1, 1].plot(t, _rel_drift(traj.energy), label="energy")
    axes[1, 1].set_ylabel("relative drift")
    axes[1, 1].set_yscale("symlog", linthresh=1e-14)
    axes[1, 1].legend(fontsize=7)
    for ax in axes[1]:
        ax.set_xlabel("t")
    fig.suptitle("wave-packet parameter trajectory")
    return _save(fig, path)


def plot_pde_diagnostics(traj: PdeTrajectory, path: str | Path) -> Path:
    fig, axes = plt.subplots(2, 2, figsize=(9, 6), sharex=True)
    t = traj.times
    axes[0, 0].plot(t, traj.cov_xx, label="cov_xx")
    axes[0, 0].plot(t, traj.cov_yy, label="cov_yy")
    axes[0, 0].plot(t, traj.cov_xy, label="cov_xy")
    axes[0, 0].set_ylabel("density covariance")
    axes[0, 0].legend(fontsize=7)
    axes[0, 1].plot(t, 1.0 - traj.fidelity_vs_gausson, color="C3")
    axes[0, 1].set_ylabel("1 - fidelity vs fitted Gaussian")
    axes[0, 1].set_yscale("log")
    axes[1, 0].plot(t, _rel_drift(traj.norm))
    axes[1, 0].set_ylabel("relative norm drift")
    axes[1, 0].set_yscale("symlog", linthresh=1e-16)
    axes[1, 1].plot(t, _rel_drift(traj.energy))
    axes[1, 1].set_ylabel("relative energy drift")
    axes[1, 1].set_yscale("symlog", linthresh=1e-14)
    for ax in axes[1]:
        ax.set_xlabel("t")
    fig.suptitle("spectral-solver diagnostics")
    return _save(fig, path)


def plot_spectra(
    entries: Iterable[tuple[float, int | None, SpectrumReport]], path: str | Path
) -> Path:
    """Largest real part of each spectrum versus rotation rate."""
    entries = list(entries)
    fig, ax = plt.subplots(figsize=(7.5, 4.5))
    com = [(om, r.max_real_part) for om, _, r in entries
           if r.subsystem is Subsystem.CENTER_OF_MASS]
    markers = {Stability.UNSTABLE: "x", Stability.MARGINAL: "o", Stability.STABLE: "^"}
    shape_pts = [(om, r) for om, _, r in entries if r.subsystem is Subsystem.SHAPE]
    if com:
        om, re = zip(*sorted(com))
        ax.plot(om, re, color="C0", lw=1.4, label="centre of mass")
    seen = set()
    for om, rep in shape_pts:
        verdict = rep.classification
        label = f"shape: {verdict}" if verdict not in seen else None
        seen.add(verdict)
        ax.plot([om], [rep.max_real_part], markers[verdict], color="C3",
                ms=4, label=label)
    ax.set_xlabel(r"rotation rate $\Omega$")
    ax.set_ylabel(r"max Re $\lambda$")
    ax.legend(fontsize=8)
    fig.suptitle("linear stability spectra")
    return _save(fig, path)


def _rel_drift(series: np.ndarray) -> np.ndarray:
    scale = abs(series[0]) if series[0] != 0.0 else 1.0
    return (series - series[0]) / scale


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)
    return path
