"""Initial-value jet recursion and the compatibility conditions at the fixed end.

From data (x0, x1) the formal time derivatives at t = 0 follow recursively:
each tension level tau_j solves the same degenerate two-point problem with a
right-hand side built from lower levels by Leibniz sums, and each position
level is

    x_{j+2} = sum_{j0+j1=j} C(j, j0) (tau_{j0} x_{j1}')' + delta_{j0} g.

Solutions continuous up to t = 0 require the traces x_j(1) to vanish; those
traces are the compatibility residuals.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .grid import Grid, DiffOps
from .tension import BvpInputs, solve_tbvp


def _binom(j: int, j0: int) -> int:
    return math.comb(j, j0)


def _trinom(j: int, j0: int, j1: int) -> int:
    # j! / (j0! j1! j2!) with j2 = j - j0 - j1, exact integer arithmetic
    return math.comb(j, j0) * math.comb(j - j0, j1)


@dataclass
class InitialDataJet:
    """Time-derivative traces {x_j}, {tau_j} of a data pair, with residuals
    |x_j(1)| for j = 0..m-1."""

    m: int
    x_jet: list = field(default_factory=list)
    tau_jet: list = field(default_factory=list)
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    u_jet: list = field(default_factory=list)          # u_j = x_j'
    tau_prime_jet: list = field(default_factory=list)  # tau_j'

    def export(self, out_dir, grid: Grid) -> None:
        os.makedirs(out_dir, exist_ok=True)
        files = []
        for j, xj in enumerate(self.x_jet):
            name = f"x_jet_{j}.csv"
            arr = np.column_stack([grid.nodes, xj])
            np.savetxt(os.path.join(out_dir, name), arr, delimiter=",",
                       header="s,x1,x2,x3", comments="", fmt="%.17g")
            files.append(name)
        for j, tj in enumerate(self.tau_jet):
            name = f"tau_jet_{j}.csv"
            arr = np.column_stack([grid.nodes, tj])
            np.savetxt(os.path.join(out_dir, name), arr, delimiter=",",
                       header="s,tau", comments="", fmt="%.17g")
            files.append(name)
        manifest = {
            "order": self.m,
            "residuals": [float(r) for r in self.residuals],
            "files": files,
        }
        with open(os.path.join(out_dir, "jet_manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2)


def initial_jet(x0: np.ndarray, x1: np.ndarray, g: np.ndarray, m: int, grid: Grid,
                ops: DiffOps | None = None) -> InitialDataJet:
    """Compute the jet {x_j}_{j<m}, {tau_j}_{j<m-1} from data (x0, x1)."""
    if not 2 <= m <= 6:
        raise ValueError(f"jet order m must be in 2..6, got {m}")
    ops = ops or DiffOps(grid)
    g = np.asarray(g, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)

    x_jet = [x0, x1]
    u_jet = [ops.d1(x0), ops.d1(x1)]
    xpp_jet = [ops.d2(x0), ops.d2(x1)]
    tau_jet: list[np.ndarray] = []
    q = np.einsum("ic,ic->i", xpp_jet[0], xpp_jet[0])

    for j in range(m - 1):
        h = np.zeros(grid.n_nodes)
        for j1 in range(j + 1):
            j2 = j - j1
            h += _binom(j, j1) * np.einsum("ic,ic->i", u_jet[j1 + 1], u_jet[j2 + 1])
        for j0 in range(j):  # j0 <= j - 1
            for j1 in range(j - j0 + 1):
                j2 = j - j0 - j1
                coeff = _trinom(j, j0, j1)
                h -= coeff * np.einsum("ic,ic->i", xpp_jet[j1], xpp_jet[j2]) * tau_jet[j0]
        a = -float(g @ u_jet[j][-1])
        tau_jet.append(solve_tbvp(BvpInputs(q=q, h=h, a=a), grid, ops).tau)

        if j <= m - 3:
            # x_{j+2} and its slope come from the same Leibniz products; the
            # slope uses a single d2 application (iterating d1 twice would
            # stack one-sided truncation errors at the ends)
            x_next = np.zeros_like(x0)
            u_next = np.zeros_like(x0)
            for j0 in range(j + 1):
                j1 = j - j0
                prod = tau_jet[j0][:, None] * u_jet[j1]
                c = _binom(j, j0)
                x_next += c * ops.d1(prod)
                u_next += c * ops.d2(prod)
            if j == 0:
                x_next = x_next + g
            x_jet.append(x_next)
            u_jet.append(u_next)
            xpp_jet.append(ops.d1(u_next))

    residuals = np.array([float(np.linalg.norm(xj[-1])) for xj in x_jet])
    tau_prime_jet = [ops.d1(tj) for tj in tau_jet]
    return InitialDataJet(m=m, x_jet=x_jet, tau_jet=tau_jet, residuals=residuals,
                          u_jet=u_jet, tau_prime_jet=tau_prime_jet)


def check_compatibility(jet: InitialDataJet, order: int, tol: float):
    """Residuals |x_j(1)| for j <= order; passes iff all are below tol."""
    if order > jet.m - 1:
        raise ValueError(f"order {order} exceeds jet order {jet.m - 1}")
    res = jet.residuals[: order + 1]
    return bool(np.all(res <= tol)), res


def orthogonality_identity(jet: InitialDataJet, j: int) -> np.ndarray:
    """Residual field of sum_{j1+j2=j} C(j, j1) u_{j1}.u_{j2} = delta_{j0}."""
    if j > jet.m - 1:
        raise ValueError(f"identity order {j} exceeds jet order {jet.m - 1}")
    acc = np.zeros(len(jet.u_jet[0]))
    for j1 in range(j + 1):
        j2 = j - j1
        acc += _binom(j, j1) * np.einsum("ic,ic->i", jet.u_jet[j1], jet.u_jet[j2])
    if j == 0:
        acc -= 1.0
    return acc


def tension_identity(jet: InitialDataJet, j: int, g: np.ndarray) -> np.ndarray:
    """Residual field of sum_{j1+j2=j} C(j, j1) x_{j1+2}.u_{j2} = tau_j' + g.u_j."""
    if j > jet.m - 3:
        raise ValueError(f"identity order {j} needs jet level {j + 2} <= {jet.m - 1}")
    g = np.asarray(g, dtype=float)
    acc = np.zeros(len(jet.u_jet[0]))
    for j1 in range(j + 1):
        j2 = j - j1
        acc += _binom(j, j1) * np.einsum("ic,ic->i", jet.x_jet[j1 + 2], jet.u_jet[j2])
    rhs = jet.tau_prime_jet[j] + jet.u_jet[j] @ g
    return acc - rhs
