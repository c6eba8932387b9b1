"""Builtin initial states: closed-form benchmarks and smooth generic data."""

from __future__ import annotations

import numpy as np

from .grid import Grid, DiffOps, StringState
from .dataprep import constrained_map
from . import diagnostics

GRAVITY_DOWN = (0.0, 0.0, -1.0)


def equilibrium_state(grid: Grid) -> StringState:
    """Straight vertical string hanging from the fixed end; exact steady state."""
    x = np.zeros((grid.n_nodes, 3))
    x[:, 2] = grid.nodes - 1.0
    return StringState(x=x, v=np.zeros_like(x), t=0.0)


def rotating_state(grid: Grid, omega: float = 1.0, t: float = 0.0) -> StringState:
    """Rigidly rotating straight string (no gravity), exact solution
    x(s, t) = (s-1)(cos wt, sin wt, 0)."""
    s = grid.nodes - 1.0
    c, si = np.cos(omega * t), np.sin(omega * t)
    x = np.column_stack([s * c, s * si, np.zeros_like(s)])
    v = np.column_stack([-s * si * omega, s * c * omega, np.zeros_like(s)])
    return StringState(x=x, v=v, t=t)


def rotating_tension(grid: Grid, omega: float = 1.0) -> np.ndarray:
    """Closed-form tension w^2 (s - s^2/2) of the rotating solution."""
    s = grid.nodes
    return omega ** 2 * (s - 0.5 * s ** 2)


def chain_mode_state(grid: Grid, mode_number: int = 1, amplitude: float = 1e-3,
                     ops: DiffOps | None = None):
    """Vertical equilibrium seeded with one transverse linear eigenmode.

    The mode shape comes from the shooting eigensolver; the perturbed tangent
    is pushed through the unit-renormalization map so the state satisfies the
    constraints exactly.  Returns (state, omega).
    """
    ops = ops or DiffOps(grid)
    omega, shape = diagnostics.linear_chain_mode(mode_number, grid)
    x = np.zeros((grid.n_nodes, 3))
    x[:, 0] = amplitude * shape
    x[:, 2] = grid.nodes - 1.0
    u0, u1 = constrained_map(ops.d1(x), np.zeros_like(x))
    x = grid.integrate_from_fixed_end(u0)
    v = grid.integrate_from_fixed_end(u1)
    return StringState(x=x, v=v, t=0.0), omega


def curved_state(grid: Grid, bend: float = 0.3, swing: float = 0.2,
                 ops: DiffOps | None = None) -> StringState:
    """Smooth, exactly unit-speed hanging data with orthogonal velocity slope.

    The tangent tilts by the angle beta(s) = bend * sin(pi s) * s^2 inside the
    (e1, e3) plane and the velocity slope swings transversally, so all
    constraint identities hold pointwise while nothing is polynomial.
    """
    s = grid.nodes
    beta = bend * np.sin(np.pi * s) * s ** 2
    u0 = np.column_stack([np.sin(beta), np.zeros_like(s), np.cos(beta)])
    # orthogonal to u0 by construction
    gamma = swing * np.cos(0.5 * np.pi * s)
    u1 = gamma[:, None] * np.column_stack(
        [np.cos(beta), np.zeros_like(s), -np.sin(beta)]
    ) + (swing * 0.5 * np.sin(np.pi * s))[:, None] * np.column_stack(
        [np.zeros_like(s), np.ones_like(s), np.zeros_like(s)]
    )
    x = grid.integrate_from_fixed_end(u0)
    v = grid.integrate_from_fixed_end(u1)
    return StringState(x=x, v=v, t=0.0)
