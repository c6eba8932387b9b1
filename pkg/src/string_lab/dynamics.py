"""Semi-discrete evolution of the string with per-stage tension re-solve.

The right-hand side of the first-order system (x, v) evaluates the nonlocal
tension from the instantaneous state, so every RK4 stage performs one BVP
solve.  The fixed end is re-imposed exactly after each step; the
inextensibility constraint is either monitored (drift recorded) or enforced
by the tangent renormalization map after each step.
"""

from __future__ import annotations

import json
import os
import warnings
from dataclasses import dataclass, field, asdict

import numpy as np

from .grid import Grid, DiffOps, StringState, make_grid, constraint_drift
from .tension import TensionField, tension_from_state
from .dataprep import constrained_map


@dataclass
class ScenarioConfig:
    """Run parameters for one simulation."""

    gravity: tuple = (0.0, 0.0, -1.0)
    n_cells: int = 128
    t_end: float = 1.0
    dt_policy: str = "cfl"       # "cfl" or "fixed"
    dt: float = 1e-3             # used by the "fixed" policy
    cfl_safety: float = 0.5
    mode: str = "project"        # "project" or "monitor"
    snap_stride: int = 10
    integrator: str = "rk4"
    diff_order: int = 2
    constraint_tol: float = 1e-3
    scenario: str = ""           # builtin scenario name, informational

    def validate(self) -> None:
        gnorm = float(np.linalg.norm(self.gravity))
        if not (abs(gnorm) <= 1e-12 or abs(gnorm - 1.0) <= 1e-12):
            raise ValueError(f"|gravity| must be 0 or 1, got {gnorm}")
        if self.dt_policy not in ("cfl", "fixed"):
            raise ValueError(f"dt_policy must be 'cfl' or 'fixed', got {self.dt_policy!r}")
        if self.mode not in ("project", "monitor"):
            raise ValueError(f"mode must be 'project' or 'monitor', got {self.mode!r}")
        if self.integrator != "rk4":
            raise ValueError(f"only the rk4 integrator is implemented, got {self.integrator!r}")
        if self.t_end <= 0 or self.dt <= 0 or not 0 < self.cfl_safety <= 1:
            raise ValueError("t_end, dt must be positive and cfl_safety in (0, 1]")
        if self.snap_stride < 1:
            raise ValueError("snap_stride must be >= 1")


@dataclass
class TrajectoryRecord:
    """Snapshots plus per-snapshot diagnostics of one run."""

    config: ScenarioConfig
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    tensions: list = field(default_factory=list)
    drift: list = field(default_factory=list)
    margin: list = field(default_factory=list)
    script_E: list = field(default_factory=list)   # filled by diagnostics
    big_E: list = field(default_factory=list)
    aborted: bool = False
    error: str | None = None

    def snapshot_dt(self) -> float:
        ts = np.asarray(self.times)
        if len(ts) < 2:
            raise ValueError("record holds fewer than two snapshots")
        gaps = np.diff(ts)
        if np.max(np.abs(gaps - gaps[0])) > 1e-9 * max(gaps[0], 1e-30):
            raise ValueError("snapshots are not uniformly spaced")
        return float(gaps[0])

    def save(self, out_dir, grid: Grid) -> list:
        os.makedirs(out_dir, exist_ok=True)
        snap_dir = os.path.join(out_dir, "snapshots")
        os.makedirs(snap_dir, exist_ok=True)
        files = []
        index = []
        for i, (t, st, tf) in enumerate(zip(self.times, self.states, self.tensions)):
            sname = f"snapshots/state_{i:04d}.csv"
            tname = f"snapshots/tension_{i:04d}.csv"
            st.write_csv(os.path.join(out_dir, sname))
            tf.write_csv(os.path.join(out_dir, tname), grid)
            index.append({"t": t, "state": sname, "tension": tname})
            files += [sname, tname]
        diag = os.path.join(out_dir, "diagnostics.csv")
        with open(diag, "w") as fh:
            fh.write("t,constraint_drift,stability_margin,E,script_E\n")
            for i, t in enumerate(self.times):
                e = self.big_E[i] if i < len(self.big_E) else float("nan")
                se = self.script_E[i] if i < len(self.script_E) else float("nan")
                fh.write(f"{t:.17g},{self.drift[i]:.17g},{self.margin[i]:.17g},"
                         f"{e:.17g},{se:.17g}\n")
        files.append("diagnostics.csv")
        manifest = {
            "config": asdict(self.config),
            "snapshots": index,
            "aborted": self.aborted,
            "error": self.error,
            "files": files,
        }
        with open(os.path.join(out_dir, "trajectory.json"), "w") as fh:
            json.dump(manifest, fh, indent=2)
        files.append("trajectory.json")
        return files


def acceleration(state: StringState, g: np.ndarray, grid: Grid,
                 ops: DiffOps | None = None):
    """Right-hand side (tau x')' + g with the fixed-end node pinned.

    The transport term is discretized in conservation (flux) form with
    midpoint tensions; at the degenerate end the product rule collapses to
    tau'(0) x'(0) because tau vanishes there.  This combination has a real,
    nonpositive spectrum for admissible tensions, which keeps the oscillatory
    dynamics neutrally stable over long runs (evaluating the product tau x'
    nodally and differentiating again yields complex eigenvalue pairs whose
    unstable branch grows exponentially).

    Returns the acceleration field and the tension field it used.  A
    nonpositive stability margin is flagged with a warning but does not stop
    the evaluation.
    """
    ops = ops or DiffOps(grid)
    g = np.asarray(g, dtype=float)
    tf = tension_from_state(state, g, grid, ops)
    if tf.stability_margin <= 0.0 and float(np.max(np.abs(tf.tau))) > 1e-14:
        warnings.warn(f"stability margin {tf.stability_margin:.3e} <= 0 at t={state.t:.6g}",
                      RuntimeWarning, stacklevel=2)
    h = grid.h
    tau_mid = 0.5 * (tf.tau[1:] + tf.tau[:-1])
    flux = tau_mid[:, None] * (state.x[1:] - state.x[:-1]) / h
    acc = np.empty_like(state.x)
    acc[1:-1] = (flux[1:] - flux[:-1]) / h
    idx, wts = ops._stencils(1)
    acc[0] = tf.tau_prime[0] * (wts[0] @ state.x[idx[0]])
    acc += g
    acc[-1] = 0.0
    return acc, tf


def cfl_dt(tf: TensionField, grid: Grid, safety: float) -> float:
    """Time step safety * h / sqrt(max tau); transport-free fallback safety * h."""
    if not 0 < safety <= 1:
        raise ValueError("safety factor must be in (0, 1]")
    tau_max = float(np.max(tf.tau))
    if tau_max <= 0.0:
        return safety * grid.h
    return safety * grid.h / np.sqrt(tau_max)


def project_state(state: StringState, grid: Grid, ops: DiffOps) -> StringState:
    """Renormalize the tangent, orthogonalize the velocity slope, rebuild.

    The correction is applied incrementally: only the difference between the
    renormalized and the raw slope fields is integrated and added.  On a
    state that already satisfies the constraints this is the identity to
    round-off; rebuilding the whole field from its differentiated slope every
    step would instead compose the reconstruct operator with itself and
    slowly amplify near-neutral modes.
    """
    v0 = ops.d1(state.x)
    v1 = ops.d1(state.v)
    u0, u1 = constrained_map(v0, v1)
    x = state.x + grid.integrate_from_fixed_end(u0 - v0)
    v = state.v + grid.integrate_from_fixed_end(u1 - v1)
    return StringState(x=x, v=v, t=state.t)


def step(state: StringState, g: np.ndarray, dt: float, grid: Grid,
         mode: str = "project", ops: DiffOps | None = None) -> StringState:
    """One classical RK4 step; 4 tension solves, fixed end re-imposed exactly."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    ops = ops or DiffOps(grid)
    g = np.asarray(g, dtype=float)
    x0, v0, t0 = state.x, state.v, state.t

    def rhs(x, v, t):
        acc, _ = acceleration(StringState(x, v, t), g, grid, ops)
        return v, acc

    k1x, k1v = rhs(x0, v0, t0)
    k2x, k2v = rhs(x0 + 0.5 * dt * k1x, v0 + 0.5 * dt * k1v, t0 + 0.5 * dt)
    k3x, k3v = rhs(x0 + 0.5 * dt * k2x, v0 + 0.5 * dt * k2v, t0 + 0.5 * dt)
    k4x, k4v = rhs(x0 + dt * k3x, v0 + dt * k3v, t0 + dt)
    x = x0 + (dt / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
    v = v0 + (dt / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
        raise FloatingPointError(f"NaN detected in RK4 step at t={t0:.6g}")
    x[-1] = 0.0
    v[-1] = 0.0
    out = StringState(x=x, v=v, t=t0 + dt)
    if mode == "project":
        out = project_state(out, grid, ops)
    return out


def simulate(config: ScenarioConfig, initial: StringState) -> TrajectoryRecord:
    """Drive the integrator to t_end, recording snapshots at the set cadence.

    On NaN or stability collapse the record is returned partially filled with
    ``aborted`` set and the cause recorded.
    """
    config.validate()
    grid = make_grid(config.n_cells)
    ops = DiffOps(grid, config.diff_order)
    initial.validate(grid, constraint_tol=config.constraint_tol, ops=ops)
    g = np.asarray(config.gravity, dtype=float)
    record = TrajectoryRecord(config=config)

    def take_snapshot(st: StringState, tf: TensionField):
        record.times.append(st.t)
        record.states.append(st.copy())
        record.tensions.append(tf)
        record.drift.append(constraint_drift(st, grid, ops))
        record.margin.append(tf.stability_margin)

    state = initial.copy()
    n_step = 0
    try:
        tf = tension_from_state(state, g, grid, ops)
        take_snapshot(state, tf)
        while state.t < config.t_end - 1e-13:
            if config.dt_policy == "cfl":
                dt = cfl_dt(tf, grid, config.cfl_safety)
            else:
                dt = config.dt
            dt = min(dt, config.t_end - state.t)
            state = step(state, g, dt, grid, config.mode, ops)
            n_step += 1
            tf = tension_from_state(state, g, grid, ops)
            if tf.stability_margin <= 0.0 and float(np.max(tf.tau)) > 0.0:
                record.aborted = True
                record.error = (f"stability collapse: margin "
                                f"{tf.stability_margin:.3e} at t={state.t:.6g}")
                take_snapshot(state, tf)
                return record
            if n_step % config.snap_stride == 0 or state.t >= config.t_end - 1e-13:
                take_snapshot(state, tf)
    except FloatingPointError as exc:
        record.aborted = True
        record.error = str(exc)
    return record


def quasilinear_residual(record: TrajectoryRecord, grid: Grid,
                         ops: DiffOps | None = None):
    """Residual of the twice-differentiated tension equation along a trajectory.

    Second time derivatives of (x, tau) from snapshot differencing stand in
    for the evolved pair (y, nu); the residual of

        -nu'' + |x''|^2 nu = 2 xdot'.ydot' - 2 (x''.y'') tau + h,
        h = 2 (|xddot'|^2 - |xdot''|^2 tau - 2 (x''.xdot'') taudot),

    is returned (L2 in s) at every snapshot with two neighbors on both sides.
    """
    if len(record.times) < 5:
        raise ValueError("quasilinear residual needs at least 5 snapshots")
    ops = ops or DiffOps(grid)
    dt = record.snapshot_dt()
    xs = [st.x for st in record.states]
    taus = [tf.tau for tf in record.tensions]
    out_t, out_r = [], []
    for i in range(2, len(xs) - 2):
        xdot = (xs[i + 1] - xs[i - 1]) / (2 * dt)
        y = (xs[i + 1] - 2 * xs[i] + xs[i - 1]) / dt ** 2
        ydot = (-xs[i - 2] + 2 * xs[i - 1] - 2 * xs[i + 1] + xs[i + 2]) / (2 * dt ** 3)
        taudot = (taus[i + 1] - taus[i - 1]) / (2 * dt)
        nu = (taus[i + 1] - 2 * taus[i] + taus[i - 1]) / dt ** 2
        xpp = ops.d2(xs[i])
        q = np.einsum("ic,ic->i", xpp, xpp)
        xdot_p = ops.d1(xdot)
        xdot_pp = ops.d2(xdot)
        y_p = ops.d1(y)
        y_pp = ops.d2(y)
        ydot_p = ops.d1(ydot)
        tau = taus[i]
        h = 2.0 * (np.einsum("ic,ic->i", y_p, y_p)
                   - np.einsum("ic,ic->i", xdot_pp, xdot_pp) * tau
                   - 2.0 * np.einsum("ic,ic->i", xpp, xdot_pp) * taudot)
        rhs = (2.0 * np.einsum("ic,ic->i", xdot_p, ydot_p)
               - 2.0 * np.einsum("ic,ic->i", xpp, y_pp) * tau + h)
        lhs = -ops.d2(nu) + q * nu
        out_t.append(record.times[i])
        out_r.append(np.sqrt(grid.trapz((lhs - rhs) ** 2)))
    return np.asarray(out_t), np.asarray(out_r)
