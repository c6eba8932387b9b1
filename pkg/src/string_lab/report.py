"""Figure rendering for the CLI report path.

Every figure lands next to the delimited output it visualizes, so a run
directory is self-contained: CSVs for machines, PNGs for eyes.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .grid import Grid  # noqa: E402
from .dynamics import TrajectoryRecord  # noqa: E402


def fig_diagnostics(record: TrajectoryRecord, path) -> str:
    """Time series panel: constraint drift, stability margin, energies."""
    ts = np.asarray(record.times)
    fig, axes = plt.subplots(2, 2, figsize=(9, 6.5))
    ax = axes[0, 0]
    drift = np.maximum(np.asarray(record.drift), 1e-18)
    ax.semilogy(ts, drift, lw=1.2)
    ax.set_xlabel("t")
    ax.set_ylabel("max | |x'| - 1 |")
    ax.set_title("constraint drift")

    ax = axes[0, 1]
    ax.plot(ts, record.margin, lw=1.2)
    ax.set_xlabel("t")
    ax.set_ylabel("min tau/s")
    ax.set_title("stability margin")

    ax = axes[1, 0]
    if record.script_E:
        ax.plot(ts, record.script_E, lw=1.2, label="script E")
    if record.big_E:
        ax.plot(ts, record.big_E, lw=1.2, label="E")
    ax.set_xlabel("t")
    ax.set_title("energy functionals")
    ax.legend(loc="best", fontsize=8)

    ax = axes[1, 1]
    grid_s = np.linspace(0.0, 1.0, len(record.tensions[-1].tau))
    ax.plot(grid_s, record.tensions[-1].tau, lw=1.2)
    ax.set_xlabel("s")
    ax.set_ylabel("tau")
    ax.set_title(f"tension at t = {ts[-1]:.3g}")
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)
    return os.fspath(path)


def fig_profiles(record: TrajectoryRecord, grid: Grid, path, n_shapes: int = 6) -> str:
    """String shapes over time (two plane projections)."""
    idx = np.unique(np.linspace(0, len(record.states) - 1, n_shapes).astype(int))
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4.2))
    cmap = plt.get_cmap("viridis")
    for j, i in enumerate(idx):
        x = record.states[i].x
        color = cmap(j / max(len(idx) - 1, 1))
        label = f"t={record.times[i]:.3g}"
        ax1.plot(x[:, 0], x[:, 2], color=color, lw=1.2, label=label)
        ax2.plot(x[:, 0], x[:, 1], color=color, lw=1.2)
    ax1.set_xlabel("x1")
    ax1.set_ylabel("x3")
    ax1.set_title("vertical plane")
    ax1.legend(fontsize=7, loc="best")
    ax2.set_xlabel("x1")
    ax2.set_ylabel("x2")
    ax2.set_title("horizontal plane")
    ax2.set_aspect("equal", adjustable="datalim")
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)
    return os.fspath(path)


def fig_convergence(result: dict, path, title: str = "convergence") -> str:
    """Log-log error plot of a convergence study with the fitted slope."""
    ns = np.array([r[0] for r in result["table"]], dtype=float)
    errs = np.array([max(r[1], 1e-18) for r in result["table"]])
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(ns, errs, "o-", lw=1.2)
    slope = result.get("slope", float("nan"))
    if np.isfinite(slope):
        ref = errs[0] * (ns / ns[0]) ** (-slope)
        ax.loglog(ns, ref, "k--", lw=0.8, label=f"slope {slope:.2f}")
        ax.legend(fontsize=8)
    ax.set_xlabel("n_cells")
    ax.set_ylabel("error")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)
    return os.fspath(path)
