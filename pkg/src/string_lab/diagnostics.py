"""Energy functionals, mode analysis, and the convergence harness.

All time derivatives here come from snapshot differencing, never from extra
evolved variables, so every instrument is pure post-processing on a
trajectory record.
"""

from __future__ import annotations

import numpy as np

from .grid import Grid, DiffOps
from .dynamics import TrajectoryRecord
from .tension import solve_phi


def _window(record: TrajectoryRecord, i: int, min_len: int):
    if len(record.times) < min_len:
        raise ValueError(f"need at least {min_len} snapshots, have {len(record.times)}")
    if not 2 <= i <= len(record.times) - 3:
        raise ValueError(f"snapshot index {i} has no centered 5-point window")
    return record.snapshot_dt()


def script_energy_form(tau: np.ndarray, y: np.ndarray, ydot: np.ndarray,
                       nu: np.ndarray, f: np.ndarray, phi_ratio: float,
                       grid: Grid, ops: DiffOps) -> float:
    """The functional itself, bilinear in the perturbation fields (y, nu, f):

    (tau ydot', ydot') + ||(tau y')'||^2 + 2((tau y')', f) - phi_ratio nu(1)^2.
    """
    ydot_p = ops.d1(ydot)
    w = ops.d1(tau[:, None] * ops.d1(y))
    term1 = grid.trapz(tau * np.einsum("ic,ic->i", ydot_p, ydot_p))
    term2 = grid.trapz(np.einsum("ic,ic->i", w, w))
    term3 = 2.0 * grid.trapz(np.einsum("ic,ic->i", w, f))
    term4 = -phi_ratio * nu[-1] ** 2
    return float(term1 + term2 + term3 + term4)


def script_energy(record: TrajectoryRecord, i: int, g: np.ndarray, grid: Grid,
                  ops: DiffOps | None = None) -> float:
    """Second-order energy functional at snapshot i (5-snapshot window).

    With y and nu the second time-differences of x and tau and
    f = 2 (taudot xdot')', evaluates the form above; phi solves the auxiliary
    initial value problem for the current bending coefficient |x''|^2 and
    supplies the boundary weight phi'(1)/phi(1).
    """
    dt = _window(record, i, 5)
    ops = ops or DiffOps(grid)
    xs = [st.x for st in record.states[i - 2: i + 3]]
    taus = [tf.tau for tf in record.tensions[i - 2: i + 3]]
    x = xs[2]
    tau = taus[2]
    xdot = (xs[3] - xs[1]) / (2 * dt)
    y = (xs[3] - 2 * xs[2] + xs[1]) / dt ** 2
    ydot = (-xs[0] + 2 * xs[1] - 2 * xs[3] + xs[4]) / (2 * dt ** 3)
    taudot = (taus[3] - taus[1]) / (2 * dt)
    nu = (taus[3] - 2 * taus[2] + taus[1]) / dt ** 2
    f = 2.0 * ops.d1(taudot[:, None] * ops.d1(xdot))

    xpp = ops.d2(x)
    q = np.einsum("ic,ic->i", xpp, xpp)
    phi = solve_phi(q, grid)
    phi_ratio = ops.deriv_at_fixed_end(phi, 1) / phi[-1]
    return script_energy_form(tau, y, ydot, nu, f, phi_ratio, grid, ops)


def big_energy(record: TrajectoryRecord, i: int, grid: Grid,
               ops: DiffOps | None = None) -> float:
    """Top-order energy ||d_t^4 x||_{X^1}^2 + ||d_t^3 x||_{X^2}^2 at snapshot i."""
    from . import norms

    dt = _window(record, i, 9)
    ops = ops or DiffOps(grid)
    xs = [st.x for st in record.states[i - 2: i + 3]]
    d3 = (-xs[0] + 2 * xs[1] - 2 * xs[3] + xs[4]) / (2 * dt ** 3)
    d4 = (xs[0] - 4 * xs[1] + 6 * xs[2] - 4 * xs[3] + xs[4]) / dt ** 4
    return float(norms.xm_norm(d4, 1, grid, ops) ** 2
                 + norms.xm_norm(d3, 2, grid, ops) ** 2)


def attach_energies(record: TrajectoryRecord, g: np.ndarray, grid: Grid,
                    ops: DiffOps | None = None) -> None:
    """Fill the per-snapshot energy columns of a record (NaN at window edges)."""
    n = len(record.times)
    record.script_E = [float("nan")] * n
    record.big_E = [float("nan")] * n
    for i in range(2, n - 2):
        try:
            record.script_E[i] = script_energy(record, i, g, grid, ops)
        except ValueError:
            pass
        try:
            record.big_E[i] = big_energy(record, i, grid, ops)
        except ValueError:
            pass


def write_diagnostics_csv(record: TrajectoryRecord, path) -> None:
    """Diagnostics time series with columns t, script_E, E, drift, margin."""
    with open(path, "w") as fh:
        fh.write("t,script_E,E,constraint_drift,stability_margin\n")
        for i, t in enumerate(record.times):
            se = record.script_E[i] if i < len(record.script_E) else float("nan")
            e = record.big_E[i] if i < len(record.big_E) else float("nan")
            fh.write(f"{t:.17g},{se:.17g},{e:.17g},"
                     f"{record.drift[i]:.17g},{record.margin[i]:.17g}\n")


def mode_frequency(record: TrajectoryRecord, component: int | None = None) -> float:
    """Dominant angular frequency of the free-end transverse displacement.

    Zero-crossing timing on the snapshot series; raises if the signal never
    oscillates.
    """
    ts = np.asarray(record.times)
    free_end = np.array([st.x[0] for st in record.states])
    if component is None:
        amps = free_end[:, :2].max(axis=0) - free_end[:, :2].min(axis=0)
        component = int(np.argmax(amps))
    w = free_end[:, component]
    w = w - np.mean(w)
    if np.max(np.abs(w)) < 1e-13:
        raise ValueError("no oscillation detected in the free-end signal")
    crossings = []
    for k in range(len(w) - 1):
        if w[k] == 0.0:
            crossings.append(ts[k])
        elif w[k] * w[k + 1] < 0.0:
            frac = w[k] / (w[k] - w[k + 1])
            crossings.append(ts[k] + frac * (ts[k + 1] - ts[k]))
    if len(crossings) < 3:
        raise ValueError("no oscillation detected: fewer than 3 zero crossings")
    half_periods = np.diff(crossings)
    return float(np.pi / np.mean(half_periods))


def linear_chain_mode(mode_number: int, grid: Grid, refine: int = 16,
                      omega_bracket: tuple | None = None):
    """Shooting solve of the hanging-chain eigenproblem -(s y')' = w^2 y, y(1) = 0.

    The regular solution is started from a power series at the degenerate end
    (y = sum (-w^2 s)^p / (p!)^2) and marched by RK4 on a refined grid; the
    eigenvalue is located by bisection on the end trace y(1; w).  Returns the
    angular frequency and the mode shape sampled on the grid nodes.
    """
    if mode_number < 1:
        raise ValueError("mode_number counts from 1")

    def series(s, omega, terms=30):
        y = 0.0
        yp = 0.0
        c = 1.0
        for p in range(terms):
            y += c * s ** p
            if p >= 1:
                yp += p * c * s ** (p - 1)
            c *= -(omega ** 2) / ((p + 1) ** 2)
        return y, yp

    def march(omega):
        h = grid.h / refine
        k0 = max(4, int(np.ceil(1e-3 / h)))  # series start, snapped to the fine grid
        total = grid.n_cells * refine
        shape = np.empty(grid.n_nodes)
        for j in range(grid.n_nodes):
            if j * refine <= k0:
                shape[j] = series(grid.nodes[j], omega)[0]
        yv = np.array(series(k0 * h, omega))

        def f(sv, st):
            # y' = v, v' = -(v + w^2 y)/s
            return np.array([sv[1], -(sv[1] + omega ** 2 * sv[0]) / st])

        for k in range(k0, total):
            s = k * h
            k1 = f(yv, s)
            k2 = f(yv + 0.5 * h * k1, s + 0.5 * h)
            k3 = f(yv + 0.5 * h * k2, s + 0.5 * h)
            k4 = f(yv + h * k3, s + h)
            yv = yv + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            if (k + 1) % refine == 0 and (k + 1) > k0:
                shape[(k + 1) // refine] = yv[0]
        return yv[0], shape

    if omega_bracket is None:
        lo, hi = 0.2, 2.0 + 1.6 * mode_number
        scan = np.linspace(lo, hi, 40 * mode_number)
        vals = [march(om)[0] for om in scan]
        brackets = [(scan[k], scan[k + 1]) for k in range(len(scan) - 1)
                    if vals[k] * vals[k + 1] < 0]
        if len(brackets) < mode_number:
            raise RuntimeError("shooting scan found too few sign changes")
        a, b = brackets[mode_number - 1]
    else:
        a, b = omega_bracket
    fa = march(a)[0]
    for _ in range(80):
        mid = 0.5 * (a + b)
        fm = march(mid)[0]
        if fa * fm <= 0:
            b = mid
        else:
            a, fa = mid, fm
        if b - a < 1e-12:
            break
    omega = 0.5 * (a + b)
    _, shape = march(omega)
    shape[-1] = 0.0
    return omega, shape


def convergence_study(runner, resolutions, ref_slope: float | None = None):
    """Run an error metric over a resolution sweep and fit the log-log slope.

    ``runner(n)`` returns the scalar error at resolution n.  Errors at the
    round-off floor are flagged and excluded from the fit; a non-monotone
    error sequence above the floor is flagged as suspicious.
    """
    rows = []
    for n in resolutions:
        rows.append((int(n), float(runner(int(n)))))
    ns = np.array([r[0] for r in rows], dtype=float)
    errs = np.array([r[1] for r in rows], dtype=float)
    floor = errs < 1e-13
    result = {"table": rows, "floor": bool(np.all(floor)), "monotone": True,
              "slope": float("nan")}
    live = ~floor
    if np.sum(live) >= 2:
        le, ln = np.log(errs[live]), np.log(ns[live])
        slope = -np.polyfit(ln, le, 1)[0]
        result["slope"] = float(slope)
        result["monotone"] = bool(np.all(np.diff(errs[live]) < 0))
    if ref_slope is not None:
        result["ref_slope"] = ref_slope
    return result
