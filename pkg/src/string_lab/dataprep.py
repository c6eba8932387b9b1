"""Repair of nearly-compatible initial data.

Strategy: add polynomial bumps localized at the fixed end,

    psi_j^delta(s) = ((s-1)^j / j!) psi((s-1)/delta),

to the derivative fields of the data.  Each bump shifts exactly one boundary
trace of one derivative order (its s-derivatives at s = 1 form a Kronecker
delta), but the tension responds nonlocally, so the coefficient vector is
found by a damped Newton iteration with a finite-difference Jacobian instead
of a linear solve.  A constrained variant pushes the candidate through the
map F(v) = v/|v| first, so the produced tangent fields satisfy |u0| = 1 and
u0.u1 = 0 to round-off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import Grid, DiffOps
from . import norms
from .compat import InitialDataJet, initial_jet


class RepairError(RuntimeError):
    """Newton repair failed (non-convergence, singular Jacobian, or bad margin)."""


def bump(r: np.ndarray) -> np.ndarray:
    """C-infinity plateau: 1 on |r| <= 1, 0 on |r| >= 2, exp-based transition."""
    r = np.abs(np.asarray(r, dtype=float))
    out = np.zeros_like(r)
    out[r <= 1.0] = 1.0
    mid = (r > 1.0) & (r < 2.0)
    if np.any(mid):
        t = r[mid]

        def f(x):
            with np.errstate(divide="ignore", over="ignore"):
                val = np.where(x > 0, np.exp(-1.0 / np.maximum(x, 1e-300)), 0.0)
            return val

        out[mid] = f(2.0 - t) / (f(2.0 - t) + f(t - 1.0))
    return out


def cutoff_psi(j: int, delta: float, s_values: np.ndarray) -> np.ndarray:
    """Nodal values of psi_j^delta; identically zero for delta <= 0."""
    if j < 0 or j > 6:
        raise ValueError(f"cutoff index must be in 0..6, got {j}")
    s = np.asarray(s_values, dtype=float)
    if delta <= 0.0:
        return np.zeros_like(s)
    return ((s - 1.0) ** j / math.factorial(j)) * bump((s - 1.0) / delta)


def constrained_map(v0: np.ndarray, v1: np.ndarray):
    """Map (v0, v1) to (v0/|v0|, DF(v0)[v1]); output is unit and orthogonal.

    DF(v0)[v1] = (1/|v0|) (v1 - (v0.v1/|v0|^2) v0).  Rejects inputs whose
    magnitude drops below 1/2 anywhere (near the singularity of F).
    """
    v0 = np.asarray(v0, dtype=float)
    v1 = np.asarray(v1, dtype=float)
    mag = np.linalg.norm(v0, axis=1)
    if np.any(mag < 0.5):
        raise ValueError(f"|v0| dropped to {mag.min():.3f} < 0.5; map rejected")
    u0 = v0 / mag[:, None]
    u1 = (v1 - np.einsum("ic,ic->i", u0, v1)[:, None] * u0) / mag[:, None]
    return u0, u1


@dataclass
class CutoffAnsatz:
    """Bump-sum correction of a data pair in derivative form.

    ``coeffs`` holds a_1 .. a_{m-2} (variant "xi", same-order repair) or
    a_1 .. a_{m-1} (variant "frak", order-raising; the top coefficient rides
    the eps-cutoff).  Odd-indexed coefficients correct v0, even-indexed ones
    correct v1, with the delta powers fixed by the parity of m.
    """

    m: int
    delta: float
    v0: np.ndarray
    v1: np.ndarray
    coeffs: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    eps: float = 0.0
    variant: str = "xi"

    def n_coeffs(self) -> int:
        return self.m - 2 if self.variant == "xi" else self.m - 1

    def validate(self) -> None:
        if self.variant not in ("xi", "frak"):
            raise ValueError(f"unknown ansatz variant {self.variant!r}")
        if not 0.0 < self.delta <= 1.0:
            raise ValueError(f"delta must be in (0, 1], got {self.delta}")
        if self.coeffs.shape != (self.n_coeffs(), 3):
            raise ValueError(
                f"variant {self.variant!r} at order {self.m} needs "
                f"{self.n_coeffs()} coefficient vectors, got {self.coeffs.shape}"
            )


def build_candidate(ansatz: CutoffAnsatz, grid: Grid):
    """Evaluate the corrected derivative fields (u0, u1) on the grid."""
    ansatz.validate()
    s = grid.nodes
    u0 = np.array(ansatz.v0, dtype=float, copy=True)
    u1 = np.array(ansatz.v1, dtype=float, copy=True)
    top = ansatz.n_coeffs()
    for idx in range(top):
        j = idx + 1  # coefficient a_j
        a = ansatz.coeffs[idx]
        width = ansatz.delta
        if ansatz.variant == "frak" and j == top:
            width = ansatz.eps
        if j % 2 == 1:
            ell = (j + 1) // 2
            scale = ansatz.delta ** (-2 * (ell - 1))
            u0 += scale * cutoff_psi(2 * ell - 1, width, s)[:, None] * a
        else:
            ell = j // 2
            scale = ansatz.delta ** (-(2 * ell - 1))
            u1 += scale * cutoff_psi(2 * ell - 1, width, s)[:, None] * a
    return u0, u1


def theta(u0: np.ndarray, u1: np.ndarray, j: int, g: np.ndarray, grid: Grid,
          ops: DiffOps | None = None) -> float:
    """Nonlocal trace functional Theta_j(u0, u1) = tau_j(1).

    Positions are rebuilt by integration from the fixed end before running
    the jet recursion to level j.
    """
    if not 0 <= j <= 4:
        raise ValueError(f"theta level must be in 0..4, got {j}")
    x0 = grid.integrate_from_fixed_end(np.asarray(u0, dtype=float))
    x1 = grid.integrate_from_fixed_end(np.asarray(u1, dtype=float))
    jet = initial_jet(x0, x1, g, j + 2, grid, ops)
    return float(jet.tau_jet[j][-1])


def _candidate_positions(ansatz: CutoffAnsatz, base_x0, base_x1, grid: Grid,
                         constrained: bool):
    """Positions (and tangent fields) of the repaired candidate.

    Free mode keeps the base positions untouched and integrates only the bump
    part, so a zero coefficient vector reproduces the input exactly.
    Constrained mode integrates the mapped tangent fields.
    """
    u0, u1 = build_candidate(ansatz, grid)
    if constrained:
        u0, u1 = constrained_map(u0, u1)
        x0 = grid.integrate_from_fixed_end(u0)
        x1 = grid.integrate_from_fixed_end(u1)
    else:
        x0 = base_x0 + grid.integrate_from_fixed_end(u0 - ansatz.v0)
        x1 = base_x1 + grid.integrate_from_fixed_end(u1 - ansatz.v1)
    return x0, x1, u0, u1


def _residual_stack(jet: InitialDataJet, delta: float, orders: int) -> np.ndarray:
    """Stacked, delta-scaled boundary traces [delta^j x_{j+2}(1)]."""
    blocks = [delta ** j * jet.x_jet[j + 2][-1] for j in range(orders)]
    return np.concatenate(blocks)


def _fd_jacobian(fun, a_flat: np.ndarray, step: float) -> np.ndarray:
    n = len(a_flat)
    jac = np.empty((n, n))
    for c in range(n):
        ap = a_flat.copy()
        am = a_flat.copy()
        ap[c] += step
        am[c] -= step
        jac[:, c] = (fun(ap) - fun(am)) / (2.0 * step)
    return jac


def _transverse_frame(u_end: np.ndarray) -> np.ndarray:
    """Orthonormal 3x3 frame whose last column is u_end."""
    n = u_end / np.linalg.norm(u_end)
    probe = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    t1 = probe - (probe @ n) * n
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(n, t1)
    return np.column_stack([t1, t2, n])


def _diag_dominant(jac: np.ndarray, constrained: bool, u_end) -> bool:
    """Back-off criterion for the cutoff width.

    Free mode: plain row diagonal dominance.  Constrained mode: the component
    along the end tangent is a gauge direction of the map F, so dominance is
    required only on the transverse sub-blocks.
    """
    if not constrained:
        jm = jac
    else:
        blocks = jac.shape[0] // 3
        frame = _transverse_frame(u_end)
        rot = np.kron(np.eye(blocks), frame)
        full = rot.T @ jac @ rot
        keep = np.array([i for i in range(3 * blocks) if i % 3 != 2])
        jm = full[np.ix_(keep, keep)]
    diag = np.abs(np.diag(jm))
    off = np.sum(np.abs(jm), axis=1) - diag
    return bool(np.all(diag >= off))


def repair_data(x0: np.ndarray, x1: np.ndarray, g: np.ndarray, m: int, grid: Grid,
                mode: str = "free", tol: float = 1e-9, ops: DiffOps | None = None,
                delta0: float = 0.25, max_iter: int = 50, fd_step: float = 1e-6,
                theta_margin: float = 0.01):
    """Correct nearly-compatible data into data compatible up to order m-1.

    Returns ``(x0_star, x1_star, report)``.  The report dict carries the
    chosen cutoff width, the coefficient vector, the residuals before and
    after, the correction size measured in X^m x X^{m-1}, the Newton history,
    and (in constrained mode) the exactly-constrained tangent fields
    ``u0_star``/``u1_star``.
    """
    if mode not in ("free", "constrained"):
        raise ValueError(f"mode must be 'free' or 'constrained', got {mode!r}")
    constrained = mode == "constrained"
    ops = ops or DiffOps(grid)
    g = np.asarray(g, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    s = grid.nodes
    n_orders = m - 2

    residuals_before = initial_jet(x0, x1, g, m, grid, ops).residuals

    theta0 = theta(ops.d1(x0), ops.d1(x1), 0, g, grid, ops)
    if theta0 < theta_margin:
        raise RepairError(
            f"tension trace Theta_0 = {theta0:.3e} below margin {theta_margin:.1e}; "
            "the trace equations are not invertible for this data"
        )

    delta = delta0
    jac = None
    for _ in range(11):
        # order-0/1 traces are removed locally; the bump sums handle the rest
        base_x0 = x0 - cutoff_psi(0, delta, s)[:, None] * x0[-1]
        base_x1 = x1 - cutoff_psi(0, delta, s)[:, None] * x1[-1]
        ansatz = CutoffAnsatz(m=m, delta=delta, v0=ops.d1(base_x0), v1=ops.d1(base_x1))
        ansatz.coeffs = np.zeros((ansatz.n_coeffs(), 3))

        def stacked(a_flat, _ansatz=ansatz, _bx0=base_x0, _bx1=base_x1, _d=delta):
            _ansatz.coeffs = a_flat.reshape(-1, 3)
            cx0, cx1, _, _ = _candidate_positions(_ansatz, _bx0, _bx1, grid, constrained)
            jet = initial_jet(cx0, cx1, g, m, grid, ops)
            return _residual_stack(jet, _d, n_orders)

        jac = _fd_jacobian(stacked, np.zeros(3 * n_orders), fd_step)
        u_end = (ansatz.v0[-1] / np.linalg.norm(ansatz.v0[-1])) if constrained else None
        if _diag_dominant(jac, constrained, u_end):
            break
        delta *= 0.5
    else:
        raise RepairError(
            "cutoff width back-off exhausted: trace Jacobian never became "
            "diagonally dominant (10 halvings from 0.25)"
        )

    # damped Newton on the coefficient vector
    a = np.zeros(3 * n_orders)
    history = []
    n_iter = 0
    res_vec = stacked(a)
    res_norm = float(np.linalg.norm(res_vec))
    converged = False
    for n_iter in range(max_iter + 1):
        ansatz.coeffs = a.reshape(-1, 3)
        cx0, cx1, cu0, cu1 = _candidate_positions(ansatz, base_x0, base_x1, grid, constrained)
        jet = initial_jet(cx0, cx1, g, m, grid, ops)
        history.append(float(np.max(jet.residuals)))
        if np.all(jet.residuals <= tol):
            converged = True
            break
        if n_iter == max_iter:
            break
        if n_iter > 0:
            jac = _fd_jacobian(stacked, a, fd_step)
        if constrained:
            step = -np.linalg.lstsq(jac, res_vec, rcond=1e-10)[0]
        else:
            try:
                step = -np.linalg.solve(jac, res_vec)
            except np.linalg.LinAlgError as exc:
                raise RepairError(f"trace Jacobian is singular: {exc}") from exc
        alpha = 1.0
        for _ in range(30):
            trial = a + alpha * step
            trial_vec = stacked(trial)
            trial_norm = float(np.linalg.norm(trial_vec))
            if trial_norm <= res_norm * (1.0 - 1e-4 * alpha) or trial_norm <= tol:
                break
            alpha *= 0.5
        a = a + alpha * step
        res_vec = stacked(a)
        res_norm = float(np.linalg.norm(res_vec))

    if not converged:
        raise RepairError(
            f"Newton did not reach tol {tol:.1e} in {max_iter} iterations "
            f"(best residual {min(history):.3e})"
        )

    correction = (norms.xm_norm(cx0 - x0, m, grid, ops)
                  + norms.xm_norm(cx1 - x1, m - 1, grid, ops))
    report = {
        "mode": mode,
        "delta": delta,
        "eps": ansatz.eps,
        "a": [float(v) for v in a],
        "residuals_before": [float(r) for r in residuals_before],
        "residuals_after": [float(r) for r in jet.residuals],
        "correction_norm": correction,
        "newton_iters": n_iter,
        "history": history,
        "theta0": theta0,
    }
    if constrained:
        report["u0_star"] = cu0
        report["u1_star"] = cu1
    return cx0, cx1, report


def raise_order_data(x0: np.ndarray, x1: np.ndarray, g: np.ndarray, m: int,
                     eps: float, grid: Grid, ops: DiffOps | None = None,
                     delta: float = 0.25, tol: float = 1e-9, max_iter: int = 50,
                     fd_step: float = 1e-6):
    """Raise the compatibility order of exactly-compatible data from m-1 to m.

    Solves the order-raising trace system at a fixed eps > 0 (the top
    coefficient rides the eps-cutoff, all others the delta-cutoff).  Only the
    eps > 0 branch exists on a fixed grid; callers study the eps -> 0 trend.
    """
    if eps <= 0.0:
        raise ValueError("raise_order_data needs eps > 0")
    if m + 1 > 6:
        raise ValueError("order raising supports m <= 5 (jet level m+1 needed)")
    ops = ops or DiffOps(grid)
    g = np.asarray(g, dtype=float)
    s = grid.nodes
    base_x0 = x0 - cutoff_psi(0, delta, s)[:, None] * x0[-1]
    base_x1 = x1 - cutoff_psi(0, delta, s)[:, None] * x1[-1]
    ansatz = CutoffAnsatz(m=m, delta=delta, v0=ops.d1(base_x0), v1=ops.d1(base_x1),
                          eps=eps, variant="frak")
    n_coeff = ansatz.n_coeffs()

    def stacked(a_flat):
        ansatz.coeffs = a_flat.reshape(-1, 3)
        cx0, cx1, _, _ = _candidate_positions(ansatz, base_x0, base_x1, grid, False)
        jet = initial_jet(cx0, cx1, g, m + 1, grid, ops)
        return _residual_stack(jet, delta, m - 1)

    a = np.zeros(3 * n_coeff)
    res = stacked(a)
    for it in range(max_iter):
        if np.linalg.norm(res, ord=np.inf) <= tol * delta ** (m - 2):
            break
        jac = _fd_jacobian(stacked, a, fd_step)
        try:
            a = a - np.linalg.solve(jac, res)
        except np.linalg.LinAlgError as exc:
            raise RepairError(f"order-raising Jacobian singular: {exc}") from exc
        res = stacked(a)
    else:
        raise RepairError(f"order raising did not converge in {max_iter} iterations")
    ansatz.coeffs = a.reshape(-1, 3)
    cx0, cx1, _, _ = _candidate_positions(ansatz, base_x0, base_x1, grid, False)
    jet = initial_jet(cx0, cx1, g, m + 1, grid, ops)
    return cx0, cx1, {"a": a.reshape(-1, 3), "eps": eps, "delta": delta,
                      "residuals": jet.residuals, "iters": it}
