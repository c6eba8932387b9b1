"""The nonlocal tension closure: a degenerate two-point boundary value problem.

Given the current string configuration, the tension solves

    -tau'' + |x''|^2 tau = |v'|^2   on (0, 1),
    tau(0) = 0,   tau'(1) = -g . x'(1),

discretized with second-order central differences, a Dirichlet row at the
free end and a ghost-point Neumann row at the fixed end.  For q = |x''|^2
nonnegative the matrix is an irreducibly diagonally dominant M-matrix, so the
Thomas algorithm needs no pivoting and the discrete solution inherits the
sign of the data.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .grid import Grid, DiffOps, StringState, fd_weights


@dataclass
class BvpInputs:
    """Data (q, h, a) of the two-point problem -tau'' + q tau = h, tau'(1) = a."""

    q: np.ndarray
    h: np.ndarray
    a: float

    def validate(self, grid: Grid) -> None:
        for name, f in (("q", self.q), ("h", self.h)):
            if len(f) != grid.n_nodes:
                raise ValueError(f"{name} length does not match grid")
            if not np.all(np.isfinite(f)):
                raise ValueError(f"{name} contains NaN or Inf")
        if not np.isfinite(self.a):
            raise ValueError("Neumann datum a is not finite")
        if np.any(self.q < 0):
            raise ValueError("potential term q must be nonnegative")


@dataclass
class TensionField:
    """Tension and its derivative on the grid, with the stability margin
    min_{i>=1} tau(s_i)/s_i (the ratio at s = 0 is read as tau'(0))."""

    tau: np.ndarray
    tau_prime: np.ndarray
    stability_margin: float

    def write_csv(self, path, grid: Grid) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "tau", "tau_prime"])
            for s, t, tp in zip(grid.nodes, self.tau, self.tau_prime):
                w.writerow([f"{s:.17g}", f"{t:.17g}", f"{tp:.17g}"])


def thomas_solve(lower: np.ndarray, diag: np.ndarray, upper: np.ndarray,
                 rhs: np.ndarray) -> np.ndarray:
    """Tridiagonal solve without pivoting.

    ``lower[i]`` multiplies x[i-1] in row i, ``upper[i]`` multiplies x[i+1].
    """
    n = len(diag)
    c = np.empty(n)
    d = np.empty(n)
    if diag[0] == 0.0:
        raise np.linalg.LinAlgError("singular tridiagonal system (zero pivot)")
    c[0] = upper[0] / diag[0]
    d[0] = rhs[0] / diag[0]
    for i in range(1, n):
        piv = diag[i] - lower[i] * c[i - 1]
        if piv == 0.0:
            raise np.linalg.LinAlgError("singular tridiagonal system (zero pivot)")
        c[i] = upper[i] / piv
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / piv
    x = np.empty(n)
    x[-1] = d[-1]
    for i in range(n - 2, -1, -1):
        x[i] = d[i] - c[i] * x[i + 1]
    return x


def _assemble(inputs: BvpInputs, grid: Grid):
    n = grid.n_nodes
    h = grid.h
    lower = np.zeros(n)
    diag = np.zeros(n)
    upper = np.zeros(n)
    rhs = np.zeros(n)
    # Dirichlet row at the degenerate end
    diag[0] = 1.0
    # interior rows
    inv_h2 = 1.0 / (h * h)
    lower[1:-1] = -inv_h2
    upper[1:-1] = -inv_h2
    diag[1:-1] = 2.0 * inv_h2 + inputs.q[1:-1]
    rhs[1:-1] = inputs.h[1:-1]
    # Neumann row at s = 1 by second-order ghost-point elimination
    lower[-1] = -2.0 * inv_h2
    diag[-1] = 2.0 * inv_h2 + inputs.q[-1]
    rhs[-1] = inputs.h[-1] + 2.0 * inputs.a / h
    return lower, diag, upper, rhs


def _apply_tridiag(lower, diag, upper, x):
    ax = diag * x
    ax[1:] += lower[1:] * x[:-1]
    ax[:-1] += upper[:-1] * x[1:]
    return ax


def solve_tbvp(inputs: BvpInputs, grid: Grid, ops: DiffOps | None = None) -> TensionField:
    """Solve -tau'' + q tau = h with tau(0) = 0, tau'(1) = a on the grid.

    One iterative-refinement pass keeps the solver round-off near machine
    epsilon; downstream jet levels differentiate tau repeatedly and would
    amplify a condition-number-sized error.
    """
    inputs.validate(grid)
    lower, diag, upper, rhs = _assemble(inputs, grid)
    tau = thomas_solve(lower, diag, upper, rhs)
    resid = rhs - _apply_tridiag(lower, diag, upper, tau)
    tau = tau + thomas_solve(lower, diag, upper, resid)
    tau[0] = 0.0
    ops = ops or DiffOps(grid)
    return make_tension_field(tau, grid, ops)


def discrete_residual(inputs: BvpInputs, tau: np.ndarray, grid: Grid) -> float:
    """Relative residual of the discrete system (direct solver sanity check)."""
    lower, diag, upper, rhs = _assemble(inputs, grid)
    ax = diag * tau
    ax[1:] += lower[1:] * tau[:-1]
    ax[:-1] += upper[:-1] * tau[1:]
    scale = max(np.max(np.abs(rhs)), np.max(np.abs(ax)), 1.0)
    return float(np.max(np.abs(ax - rhs)) / scale)


def make_tension_field(tau: np.ndarray, grid: Grid, ops: DiffOps | None = None) -> TensionField:
    ops = ops or DiffOps(grid)
    tau = np.asarray(tau, dtype=float)
    tau_prime = ops.d1(tau)
    ratios = tau[1:] / grid.nodes[1:]
    margin = min(float(np.min(ratios)), float(tau_prime[0]))
    return TensionField(tau=tau, tau_prime=tau_prime, stability_margin=margin)


def stability_margin(tf: TensionField) -> float:
    return tf.stability_margin


def tension_from_state(state: StringState, g: np.ndarray, grid: Grid,
                       ops: DiffOps | None = None) -> TensionField:
    """Assemble the closure data from a string state and solve for the tension."""
    ops = ops or DiffOps(grid)
    g = np.asarray(g, dtype=float)
    xp = ops.d1(state.x)
    xpp = ops.d2(state.x)
    vp = ops.d1(state.v)
    q = np.einsum("ic,ic->i", xpp, xpp)
    h = np.einsum("ic,ic->i", vp, vp)
    a = -float(g @ xp[-1])
    return solve_tbvp(BvpInputs(q=q, h=h, a=a), grid, ops)


def _midpoint_values(q: np.ndarray, grid: Grid) -> np.ndarray:
    """Cubic interpolation of a nodal field at interval midpoints."""
    n = len(q)
    mids = np.empty(n - 1)
    if n >= 4:
        # interior intervals: symmetric 4-point rule
        mids[1:-1] = (-q[:-3] + 9.0 * q[1:-2] + 9.0 * q[2:-1] - q[3:]) / 16.0
        w_first = fd_weights(0.5 * grid.h, grid.nodes[:4], 0)
        mids[0] = w_first @ q[:4]
        w_last = fd_weights(1.0 - 0.5 * grid.h, grid.nodes[-4:], 0)
        mids[-1] = w_last @ q[-4:]
    else:
        mids[:] = 0.5 * (q[:-1] + q[1:])
    return mids


def solve_phi(q: np.ndarray, grid: Grid) -> np.ndarray:
    """March the auxiliary problem -phi'' + q phi = 0, phi(0) = 0, phi'(0) = 1.

    RK4 on the first-order system with cubic midpoint interpolation of q.
    For q >= 0 the solution is increasing, hence positive for s > 0; losing
    positivity signals invalid data and raises.
    """
    q = np.asarray(q, dtype=float)
    if len(q) != grid.n_nodes:
        raise ValueError("q length does not match grid")
    if np.any(q < 0):
        raise ValueError("potential term q must be nonnegative")
    h = grid.h
    q_mid = _midpoint_values(q, grid)
    phi = np.empty(grid.n_nodes)
    psi = np.empty(grid.n_nodes)
    phi[0], psi[0] = 0.0, 1.0
    for i in range(grid.n_cells):
        y = np.array([phi[i], psi[i]])

        def f(yv, qv):
            return np.array([yv[1], qv * yv[0]])

        k1 = f(y, q[i])
        k2 = f(y + 0.5 * h * k1, q_mid[i])
        k3 = f(y + 0.5 * h * k2, q_mid[i])
        k4 = f(y + h * k3, q[i + 1])
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        phi[i + 1], psi[i + 1] = y
    if np.any(phi[1:] <= 0.0):
        raise ValueError("phi lost positivity; coefficient field is not admissible")
    return phi


def tension_lower_bound(x0: np.ndarray, x1: np.ndarray, g: np.ndarray, grid: Grid,
                        ops: DiffOps | None = None) -> float:
    """Explicit lower bound for the initial margin min tau0(s)/s.

    Evaluates (-g.x0'(1) + ||s^(1/2) x1'||^2 exp(-W)) exp(-W) with
    W = ||s^(1/2) x0''||^2.  A negative value carries no information.
    """
    ops = ops or DiffOps(grid)
    g = np.asarray(g, dtype=float)
    x0p = ops.d1(np.asarray(x0, dtype=float))
    x0pp = ops.d2(np.asarray(x0, dtype=float))
    x1p = ops.d1(np.asarray(x1, dtype=float))
    s = grid.nodes
    w_bend = grid.trapz(s * np.einsum("ic,ic->i", x0pp, x0pp))
    w_kin = grid.trapz(s * np.einsum("ic,ic->i", x1p, x1p))
    hang = -float(g @ x0p[-1])
    return float((hang + w_kin * np.exp(-w_bend)) * np.exp(-w_bend))
