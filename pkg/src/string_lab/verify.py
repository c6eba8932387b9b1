"""Self-check suites behind ``string-lab verify``.

Each suite re-runs the closed-form and fuzz checks of one subsystem and
returns machine-readable results.  Inequalities whose constants the theory
leaves unspecified are checked against constants measured once on a fixed
corpus and frozen here with headroom; growth past a frozen constant is a
regression, not a theory violation.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .grid import make_grid, DiffOps, StringState, constraint_drift
from . import norms
from .tension import (BvpInputs, solve_tbvp, tension_from_state, solve_phi,
                      tension_lower_bound, discrete_residual)
from .compat import initial_jet, check_compatibility, orthogonality_identity, tension_identity
from .dataprep import repair_data, theta, cutoff_psi
from .dynamics import ScenarioConfig, simulate, cfl_dt, quasilinear_residual, step
from . import scenarios
from . import diagnostics

DEFAULT_SEED = 20250810

# Measured on the seeded corpora below, frozen with headroom; growth past one
# of these is a regression of the implementation, not a theory statement.
FROZEN = {
    "xeps_equiv_C": 1.9,        # X^1_eps vs L2 + weighted-slope form, eps = 0.25
    "disc_bracket": (1.5, 22.0),  # disc lift / X^m ratio, m <= 3 (dimension factors)
    "algebra_C": 2.9,           # ||uv||_Xm <= C ||u||_X(max(m,2)) ||v||_Xm, m <= 3
    "bvp_linf_C": 1.2,          # ||tau||_inf <= C (|a| + ||s h||_L1), ||v||_Y0 <= 2
}


def seed_from_env() -> int:
    val = os.environ.get("STRING_LAB_SEED", "")
    return int(val) if val else DEFAULT_SEED


def _random_poly(rng, grid, degree=6, vec=False):
    coef = rng.normal(size=(degree + 1, 3) if vec else degree + 1)
    s = grid.nodes
    if vec:
        out = np.zeros((grid.n_nodes, 3))
        for p in range(degree + 1):
            out += np.outer(s ** p, coef[p])
        return out
    return sum(coef[p] * s ** p for p in range(degree + 1))


def _check(name, passed, detail=""):
    return {"name": name, "passed": bool(passed), "detail": str(detail)}


# ----------------------------------------------------------------- norms ---

def suite_norms(seed: int | None = None) -> list:
    rng = np.random.default_rng(seed if seed is not None else seed_from_env())
    checks = []
    fine = make_grid(4096)
    fops = DiffOps(fine)
    s = fine.nodes

    val = norms.xm_norm(np.ones_like(s), 0, fine, fops)
    checks.append(_check("xm_const_m0", abs(val - 1.0) < 1e-6, f"{val:.9f}"))
    val = norms.xm_norm(s, 0, fine, fops)
    checks.append(_check("xm_linear_m0", abs(val - 1 / np.sqrt(3)) < 1e-6, f"{val:.9f}"))
    val = norms.xm_norm(s ** 2, 2, fine, fops)
    ref = np.sqrt(1 / 5 + 4 / 3 + 4 / 3)
    checks.append(_check("xm_quadratic_m2", abs(val - ref) / ref < 1e-6, f"{val:.9f}"))

    val = norms.ym_norm(np.ones_like(s), 0, fine, fops)
    checks.append(_check("ym_const_m0", abs(val - np.sqrt(0.5)) / np.sqrt(0.5) < 1e-6,
                         f"{val:.9f} vs sqrt(1/2)"))
    checks.append(_check("ym_zero", norms.ym_norm(np.zeros_like(s), 1, fine, fops) == 0.0))
    w = s ** 2 * (1.0 - s)
    lhs = norms.ym_norm(fops.d1(w), 1, fine, fops) ** 2 + norms.l2_norm(w, fine) ** 2
    rhs = norms.xm_norm(w, 2, fine, fops) ** 2
    checks.append(_check("ym_defining_identity", abs(lhs - rhs) / rhs < 1e-5,
                         f"lhs={lhs:.9f} rhs={rhs:.9f}"))

    val = norms.xeps_norm(np.ones_like(s), 2, 0.25, fine, fops)
    checks.append(_check("xeps_const_k2", abs(val - 1.0) < 1e-9, f"{val:.12f}"))
    checks.append(_check("xeps_zero", norms.xeps_norm(np.zeros_like(s), 1, 0.25, fine) == 0.0))

    grid = make_grid(512)
    ops = DiffOps(grid)
    ratios = []
    for _ in range(60):
        u = _random_poly(rng, grid)
        equiv = np.sqrt(norms.l2_norm(u, grid) ** 2
                        + norms.weighted_l2_sq(ops.d1(u), 0.75, grid))
        ratios.append(norms.xeps_norm(u, 1, 0.25, grid, ops) / equiv)
    c = FROZEN["xeps_equiv_C"]
    ok = min(ratios) > 1 / c and max(ratios) < c
    checks.append(_check("xeps_equivalence_bracket", ok,
                         f"ratio in [{min(ratios):.3f}, {max(ratios):.3f}], frozen C={c}"))

    mu = norms.averaging(np.full(grid.n_nodes, 3.0), grid)
    checks.append(_check("averaging_const", np.allclose(mu, 3.0, atol=1e-12)))
    mu = norms.averaging(grid.nodes ** 3, grid)
    checks.append(_check("averaging_monomial",
                         np.max(np.abs(mu - grid.nodes ** 3 / 4)) < 1e-4,
                         "s^3 -> s^3/4"))

    violations = 0
    worst = 0.0
    for _ in range(1000):
        u = _random_poly(rng, grid, degree=5)
        m = int(rng.integers(0, 4))
        lhs = norms.xm_norm(norms.averaging(u, grid), m, grid, ops)
        rhs = 2.0 * norms.xm_norm(u, m, grid, ops) + 1e-6 * (1 + norms.xm_norm(u, m, grid, ops))
        worst = max(worst, lhs / rhs)
        if lhs > rhs:
            violations += 1
    checks.append(_check("averaging_bound_fuzz", violations == 0,
                         f"1000 fields, worst ratio {worst:.4f}"))

    violations = 0
    for _ in range(1000):
        u = _random_poly(rng, grid, degree=6)
        big_u = grid.integrate_from_fixed_end(u)
        lhs = norms.l2_norm(big_u, grid)
        rhs = 2.0 * np.sqrt(norms.weighted_l2_sq(u, 1.0, grid))
        if lhs > rhs + 1e-12:
            violations += 1
    checks.append(_check("hardy_bound_fuzz", violations == 0, "1000 fields"))

    fine2 = make_grid(2048)
    f2ops = DiffOps(fine2)
    val = norms.disc_lift_norm(np.ones(fine2.n_nodes), 0, fine2, f2ops)
    checks.append(_check("disc_const", abs(val - np.sqrt(np.pi)) / np.sqrt(np.pi) < 1e-6,
                         f"{val:.9f} vs sqrt(pi)"))
    val = norms.disc_lift_norm(fine2.nodes, 0, fine2, f2ops)
    ref = np.sqrt(np.pi / 3)
    checks.append(_check("disc_linear", abs(val - ref) / ref < 1e-6, f"{val:.9f}"))
    ratios = []
    for _ in range(40):
        u = _random_poly(rng, grid)
        m = int(rng.integers(0, 4))
        ratios.append(norms.disc_lift_norm(u, m, grid, ops) / norms.xm_norm(u, m, grid, ops))
    lo, hi = FROZEN["disc_bracket"]
    ok = min(ratios) > lo and max(ratios) < hi
    checks.append(_check("disc_equivalence_bracket", ok,
                         f"ratio in [{min(ratios):.3f}, {max(ratios):.3f}], frozen [{lo}, {hi}]"))

    worst = 0.0
    for _ in range(200):
        u = _random_poly(rng, grid, degree=4)
        v = _random_poly(rng, grid, degree=4)
        m = int(rng.integers(0, 4))
        denom = norms.xm_norm(u, max(m, 2), grid, ops) * norms.xm_norm(v, m, grid, ops)
        worst = max(worst, norms.xm_norm(u * v, m, grid, ops) / denom)
    checks.append(_check("algebra_property", worst <= FROZEN["algebra_C"],
                         f"worst C = {worst:.4f}, frozen {FROZEN['algebra_C']}"))

    u = _random_poly(rng, grid)
    v = _random_poly(rng, grid)
    tri_ok = True
    hom_ok = True
    for m in range(4):
        nu, nv = norms.xm_norm(u, m, grid, ops), norms.xm_norm(v, m, grid, ops)
        tri_ok &= norms.xm_norm(u + v, m, grid, ops) <= nu + nv + 1e-12 * (nu + nv)
        hom_ok &= abs(norms.xm_norm(-2.5 * u, m, grid, ops) - 2.5 * nu) <= 1e-12 * nu
    checks.append(_check("triangle_inequality", tri_ok))
    checks.append(_check("absolute_homogeneity", hom_ok))
    zeros_ok = all(
        fn(np.zeros(grid.n_nodes), m, grid, ops) == 0.0
        for fn in (norms.xm_norm, norms.ym_norm) for m in range(3)
    )
    checks.append(_check("zero_field_norms", zeros_ok))
    return checks


# --------------------------------------------------------------- tension ---

def suite_tension(seed: int | None = None) -> list:
    rng = np.random.default_rng(seed if seed is not None else seed_from_env())
    checks = []
    grid = make_grid(256)
    ops = DiffOps(grid)
    s = grid.nodes
    zero = np.zeros_like(s)

    tf = solve_tbvp(BvpInputs(q=zero, h=zero, a=1.0), grid, ops)
    checks.append(_check("tbvp_linear_exact", np.max(np.abs(tf.tau - s)) < 1e-12,
                         f"max err {np.max(np.abs(tf.tau - s)):.2e}"))
    tf = solve_tbvp(BvpInputs(q=zero, h=np.ones_like(s), a=0.0), grid, ops)
    ref = s - 0.5 * s ** 2
    checks.append(_check("tbvp_quadratic_exact", np.max(np.abs(tf.tau - ref)) < 1e-10))
    res = discrete_residual(BvpInputs(q=zero, h=np.ones_like(s), a=0.0), tf.tau, grid)
    checks.append(_check("tbvp_discrete_residual", res < 1e-12, f"{res:.2e}"))

    def manufactured_err(n):
        g = make_grid(n)
        ss = g.nodes
        tau_ex = ss * np.exp(-ss)
        q = ss ** 2
        h = np.exp(-ss) * (2.0 - ss) + q * tau_ex
        a = 0.0 * np.exp(-1.0)  # tau' = e^-s (1 - s) vanishes at 1
        tf_n = solve_tbvp(BvpInputs(q=q, h=h, a=a), g)
        return float(np.max(np.abs(tf_n.tau - tau_ex)))

    study = diagnostics.convergence_study(manufactured_err, [64, 128, 256])
    checks.append(_check("tbvp_manufactured_order", 1.8 <= study["slope"] <= 2.2,
                         f"slope {study['slope']:.3f}"))

    st = scenarios.equilibrium_state(grid)
    tf = tension_from_state(st, scenarios.GRAVITY_DOWN, grid, ops)
    checks.append(_check("tension_static_vertical", np.max(np.abs(tf.tau - s)) < 1e-10))
    st = scenarios.rotating_state(grid)
    tf = tension_from_state(st, (0.0, 0.0, 0.0), grid, ops)
    checks.append(_check("tension_rotating",
                         np.max(np.abs(tf.tau - scenarios.rotating_tension(grid))) < 1e-10))
    st = scenarios.equilibrium_state(grid)
    tf = tension_from_state(st, (0.0, 0.0, 0.0), grid, ops)
    checks.append(_check("tension_free_rest_zero", np.max(np.abs(tf.tau)) < 1e-12))

    violations = 0
    for _ in range(1000):
        q = _random_poly(rng, grid, degree=4) ** 2
        h = _random_poly(rng, grid, degree=4) ** 2
        a = float(rng.uniform(0.0, 2.0))
        tf = solve_tbvp(BvpInputs(q=q, h=h, a=a), grid, ops)
        if np.min(tf.tau) < -1e-12:
            violations += 1
    checks.append(_check("tbvp_positivity_fuzz", violations == 0, "1000 inputs"))

    q = _random_poly(rng, grid, degree=4) ** 2
    h1 = _random_poly(rng, grid, degree=3)
    h2 = _random_poly(rng, grid, degree=3)
    a1, a2 = 0.7, -0.4
    t12 = solve_tbvp(BvpInputs(q=q, h=h1 + h2, a=a1 + a2), grid, ops).tau
    tsum = (solve_tbvp(BvpInputs(q=q, h=h1, a=a1), grid, ops).tau
            + solve_tbvp(BvpInputs(q=q, h=h2, a=a2), grid, ops).tau)
    scale = max(1.0, np.max(np.abs(t12)))
    checks.append(_check("tbvp_linearity", np.max(np.abs(t12 - tsum)) / scale < 1e-12))

    worst = 0.0
    for _ in range(200):
        v = _random_poly(rng, grid, degree=3, vec=True)
        ynorm = norms.ym_norm(v, 0, grid, ops)
        if ynorm > 2.0:
            v = v * (2.0 / ynorm)
        q = np.einsum("ic,ic->i", v, v)
        h = _random_poly(rng, grid, degree=3) ** 2
        a = float(rng.uniform(0.0, 1.0))
        tf = solve_tbvp(BvpInputs(q=q, h=h, a=a), grid, ops)
        bound = abs(a) + grid.trapz(grid.nodes * np.abs(h))
        worst = max(worst, np.max(np.abs(tf.tau)) / bound)
    checks.append(_check("tbvp_linf_bound", worst <= FROZEN["bvp_linf_C"],
                         f"worst C = {worst:.4f}, frozen {FROZEN['bvp_linf_C']}"))

    phi = solve_phi(zero, grid)
    checks.append(_check("phi_free", np.max(np.abs(phi - s)) < 1e-12))
    phi = solve_phi(np.ones_like(s), grid)
    checks.append(_check("phi_sinh", np.max(np.abs(phi - np.sinh(s))) < 1e-8,
                         f"max err {np.max(np.abs(phi - np.sinh(s))):.2e}"))

    tf = solve_tbvp(BvpInputs(q=zero, h=zero, a=1.0), grid, ops)
    checks.append(_check("margin_linear", abs(tf.stability_margin - 1.0) < 1e-10))
    tf = solve_tbvp(BvpInputs(q=zero, h=np.ones_like(s), a=0.0), grid, ops)
    checks.append(_check("margin_parabola", abs(tf.stability_margin - 0.5) < 1e-8))

    st = scenarios.equilibrium_state(grid)
    b = tension_lower_bound(st.x, st.v, scenarios.GRAVITY_DOWN, grid, ops)
    checks.append(_check("lower_bound_vertical", abs(b - 1.0) < 1e-10, f"{b:.6f}"))
    b = tension_lower_bound(st.x, st.v, (0.0, 0.0, 0.0), grid, ops)
    checks.append(_check("lower_bound_rest", abs(b) < 1e-12))
    st = scenarios.rotating_state(grid)
    b = tension_lower_bound(st.x, st.v, (0.0, 0.0, 0.0), grid, ops)
    tf = tension_from_state(st, (0.0, 0.0, 0.0), grid, ops)
    checks.append(_check("lower_bound_rotating_tight",
                         abs(b - 0.5) < 1e-6 and tf.stability_margin >= b - 1e-8,
                         f"bound {b:.6f}, margin {tf.stability_margin:.6f}"))
    return checks


# -------------------------------------------------------------- dynamics ---

def _rotating_error(n: int) -> float:
    grid = make_grid(n)
    cfg = ScenarioConfig(gravity=(0.0, 0.0, 0.0), n_cells=n, t_end=1.0,
                         mode="project", snap_stride=10 ** 9, scenario="rotating")
    rec = simulate(cfg, scenarios.rotating_state(grid))
    ref = scenarios.rotating_state(grid, t=rec.times[-1])
    return float(np.max(np.abs(rec.states[-1].x - ref.x)))


def suite_dynamics(seed: int | None = None, jobs: int = 1) -> list:
    checks = []
    grid = make_grid(64)
    cfg = ScenarioConfig(gravity=scenarios.GRAVITY_DOWN, n_cells=64, t_end=0.3,
                         snap_stride=20, scenario="equilibrium")
    rec = simulate(cfg, scenarios.equilibrium_state(grid))
    dev = max(np.max(np.abs(st.x - rec.states[0].x)) for st in rec.states)
    checks.append(_check("equilibrium_fixed_point", dev < 1e-9, f"max dev {dev:.2e}"))

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            errs = dict(zip([32, 64], pool.map(_rotating_error, [32, 64])))
    else:
        errs = {n: _rotating_error(n) for n in [32, 64]}
    checks.append(_check("rotating_error", errs[64] < 1e-4,
                         f"L_inf at t=1: {errs[64]:.2e} (n=64)"))
    checks.append(_check("rotating_error_decreasing", errs[64] < errs[32],
                         f"{errs[32]:.2e} -> {errs[64]:.2e}"))

    st = scenarios.rotating_state(grid)
    tf = tension_from_state(st, (0.0, 0.0, 0.0), grid)
    checks.append(_check("cfl_formula",
                         abs(cfl_dt(tf, grid, 0.5) - 0.5 * grid.h / np.sqrt(0.5)) < 1e-12))
    from .tension import TensionField
    tf0 = TensionField(tau=np.zeros(grid.n_nodes), tau_prime=np.zeros(grid.n_nodes),
                       stability_margin=0.0)
    checks.append(_check("cfl_fallback", cfl_dt(tf0, grid, 0.5) == 0.5 * grid.h))

    cfg = ScenarioConfig(gravity=(0.0, 0.0, 0.0), n_cells=64, t_end=0.5,
                         dt_policy="fixed", dt=0.005, snap_stride=10,
                         mode="project", scenario="rotating")
    rec = simulate(cfg, scenarios.rotating_state(grid))
    checks.append(_check("project_drift", max(rec.drift) < 1e-10,
                         f"max drift {max(rec.drift):.2e}"))
    ts, res = quasilinear_residual(rec, grid)
    checks.append(_check("ql_residual_rotating_small", np.max(res) < 1e-2,
                         f"max {np.max(res):.2e}"))

    cfg = ScenarioConfig(gravity=scenarios.GRAVITY_DOWN, n_cells=64, t_end=0.2,
                         dt_policy="fixed", dt=0.004, snap_stride=5,
                         scenario="equilibrium")
    rec = simulate(cfg, scenarios.equilibrium_state(grid))
    ts, res = quasilinear_residual(rec, grid)
    checks.append(_check("ql_residual_equilibrium", np.max(res) < 1e-8,
                         f"max {np.max(res):.2e}"))
    mid = len(rec.tensions) // 2
    rec.tensions[mid].tau = rec.tensions[mid].tau + 0.05 * grid.nodes
    ts, res2 = quasilinear_residual(rec, grid)
    checks.append(_check("ql_residual_detects_corruption", np.max(res2) > 100 * np.max(res),
                         f"spike {np.max(res2):.2e}"))
    return checks


# ---------------------------------------------------------- compatibility ---

def suite_compatibility(seed: int | None = None) -> list:
    rng = np.random.default_rng(seed if seed is not None else seed_from_env())
    checks = []
    grid = make_grid(256)
    ops = DiffOps(grid)
    s = grid.nodes

    st = scenarios.equilibrium_state(grid)
    jet = initial_jet(st.x, st.v, scenarios.GRAVITY_DOWN, 4, grid, ops)
    ok = (np.max(np.abs(jet.tau_jet[0] - s)) < 1e-10
          and np.max(np.abs(jet.x_jet[2])) < 1e-10
          and np.max(np.abs(jet.tau_jet[1])) < 1e-10
          and np.max(np.abs(jet.x_jet[3])) < 1e-10
          and np.max(jet.residuals) < 1e-10)
    checks.append(_check("equilibrium_jet", ok, f"max residual {np.max(jet.residuals):.2e}"))

    st = scenarios.rotating_state(grid)
    jet_r = initial_jet(st.x, st.v, (0.0, 0.0, 0.0), 4, grid, ops)
    x2_ref = np.column_stack([1.0 - s, np.zeros_like(s), np.zeros_like(s)])
    ok = (np.max(np.abs(jet_r.tau_jet[0] - scenarios.rotating_tension(grid))) < 1e-10
          and np.max(np.abs(jet_r.x_jet[2] - x2_ref)) < 1e-10
          and np.max(jet_r.residuals) < 1e-10)
    checks.append(_check("rotating_jet", ok, f"max residual {np.max(jet_r.residuals):.2e}"))

    x0 = st.x
    x1 = np.zeros_like(x0)
    jet0 = initial_jet(x0, x1, (0.0, 0.0, 0.0), 4, grid, ops)
    ok = all(np.max(np.abs(t)) < 1e-12 for t in jet0.tau_jet) and \
        all(np.max(np.abs(x)) < 1e-12 for x in jet0.x_jet[2:])
    checks.append(_check("free_rest_jet_trivial", ok))

    bad_x1 = x1.copy()
    bad_x1[:, 0] += 0.1
    jet_bad = initial_jet(x0, bad_x1, (0.0, 0.0, 0.0), 3, grid, ops)
    passed, res = check_compatibility(jet_bad, 1, 1e-8)
    checks.append(_check("detector_order1", (not passed) and abs(res[1] - 0.1) < 1e-12,
                         f"residual {res[1]:.3f}"))

    worst = 0.0
    for j in range(3):
        worst = max(worst, np.max(np.abs(orthogonality_identity(jet_r, j))))
    for j in range(2):
        worst = max(worst, np.max(np.abs(tension_identity(jet_r, j, (0, 0, 0)))))
    checks.append(_check("structure_identities_rotating", worst < 1e-8, f"L_inf {worst:.2e}"))

    def identity_err(n):
        g = make_grid(n)
        o = DiffOps(g)
        stc = scenarios.curved_state(g)
        jc = initial_jet(stc.x, stc.v, scenarios.GRAVITY_DOWN, 5, g, o)
        return float(np.max(np.abs(orthogonality_identity(jc, 2))))

    study = diagnostics.convergence_study(identity_err, [64, 128, 256])
    checks.append(_check("identity_convergence_order", 1.6 <= study["slope"] <= 2.4,
                         f"slope {study['slope']:.3f}"))

    ang = rng.uniform(0, 2 * np.pi)
    rot = np.array([[np.cos(ang), -np.sin(ang), 0.0],
                    [np.sin(ang), np.cos(ang), 0.0],
                    [0.0, 0.0, 1.0]])
    stc = scenarios.curved_state(grid)
    jet_a = initial_jet(stc.x, stc.v, scenarios.GRAVITY_DOWN, 4, grid, ops)
    jet_b = initial_jet(stc.x @ rot.T, stc.v @ rot.T, scenarios.GRAVITY_DOWN, 4, grid, ops)
    dev = np.max(np.abs(jet_a.residuals - jet_b.residuals))
    checks.append(_check("equivariance_rotation", dev < 1e-10, f"dev {dev:.2e}"))

    th = theta(ops.d1(scenarios.equilibrium_state(grid).x),
               np.zeros((grid.n_nodes, 3)), 0, scenarios.GRAVITY_DOWN, grid, ops)
    checks.append(_check("theta_vertical", abs(th - 1.0) < 1e-10, f"{th:.8f}"))
    st = scenarios.rotating_state(grid)
    th = theta(ops.d1(st.x), ops.d1(st.v), 0, (0, 0, 0), grid, ops)
    checks.append(_check("theta_rotating", abs(th - 0.5) < 1e-10, f"{th:.8f}"))

    pert = 1e-3 * cutoff_psi(1, 0.2, s)
    x0p = st.x + grid.integrate_from_fixed_end(pert[:, None] * np.array([0.0, 0.0, 1.0]))
    x0s, x1s, rep = repair_data(x0p, st.v, (0.0, 0.0, 0.0), 4, grid, mode="free")
    checks.append(_check("repair_free", max(rep["residuals_after"]) <= 1e-9,
                         f"iters {rep['newton_iters']}, corr {rep['correction_norm']:.2e}"))
    return checks


# ----------------------------------------------------------------- energy ---

def suite_energy(seed: int | None = None) -> list:
    checks = []
    n = 128
    grid = make_grid(n)
    g0 = (0.0, 0.0, 0.0)
    cfg = ScenarioConfig(gravity=g0, n_cells=n, t_end=1.0, dt_policy="fixed",
                         dt=0.0025, snap_stride=4, mode="project", scenario="rotating")
    rec = simulate(cfg, scenarios.rotating_state(grid))
    diagnostics.attach_energies(rec, g0, grid)
    vals = np.array([v for v in rec.script_E if np.isfinite(v)])
    ref = 2.0 / 3.0
    dev = np.max(np.abs(vals - ref)) / ref
    checks.append(_check("script_energy_rotating_constant", dev < 0.02,
                         f"max rel dev {dev:.4f} about {ref:.4f}"))
    evals = np.array([v for v in rec.big_E if np.isfinite(v)])
    e_ref = 13.0 / 6.0
    dev = abs(np.mean(evals) - e_ref) / e_ref
    checks.append(_check("big_energy_rotating_value", dev < 0.05,
                         f"mean {np.mean(evals):.4f} vs {e_ref:.4f}"))

    cfgq = ScenarioConfig(gravity=scenarios.GRAVITY_DOWN, n_cells=n, t_end=0.5,
                          dt_policy="fixed", dt=0.0025, snap_stride=8,
                          mode="project", scenario="equilibrium")
    recq = simulate(cfgq, scenarios.equilibrium_state(grid))
    diagnostics.attach_energies(recq, scenarios.GRAVITY_DOWN, grid)
    vals = np.array([v for v in recq.script_E if np.isfinite(v)])
    checks.append(_check("script_energy_equilibrium_zero", np.max(np.abs(vals)) < 1e-8,
                         f"max {np.max(np.abs(vals)):.2e}"))

    ops = DiffOps(grid)
    rng = np.random.default_rng(seed if seed is not None else seed_from_env())
    tau = grid.nodes * (1.0 + 0.1 * grid.nodes)
    y = _random_poly(rng, grid, degree=3, vec=True)
    ydot = _random_poly(rng, grid, degree=3, vec=True)
    f = _random_poly(rng, grid, degree=2, vec=True)
    nu = _random_poly(rng, grid, degree=2)
    base = diagnostics.script_energy_form(tau, y, ydot, nu, f, 1.3, grid, ops)
    lam = 0.37
    scaled = diagnostics.script_energy_form(tau, lam * y, lam * ydot, lam * nu,
                                            lam * f, 1.3, grid, ops)
    checks.append(_check("script_energy_quadratic_scaling",
                         abs(scaled - lam ** 2 * base) < 1e-10 * max(abs(base), 1.0),
                         f"{scaled:.6e} vs {lam ** 2 * base:.6e}"))

    checks.append(_check("mode_frequency_first",
                         _mode_check(1, 1.2024, 0.01), "shooting vs simulated"))
    return checks


def _mode_check(mode_number: int, omega_ref: float, rtol: float) -> bool:
    n = 64
    grid = make_grid(n)
    state, omega_lin = scenarios.chain_mode_state(grid, mode_number, 1e-3)
    t_end = 3.2 * 2 * np.pi / omega_lin
    cfg = ScenarioConfig(gravity=scenarios.GRAVITY_DOWN, n_cells=n, t_end=t_end,
                         dt_policy="fixed", dt=t_end / 2800, snap_stride=4,
                         mode="project", scenario=f"chain-mode-{mode_number}")
    rec = simulate(cfg, state)
    omega = diagnostics.mode_frequency(rec)
    return abs(omega - omega_ref) / omega_ref < rtol and \
        abs(omega_lin - omega_ref) / omega_ref < 0.002


SUITES = {
    "norms": suite_norms,
    "tension": suite_tension,
    "dynamics": suite_dynamics,
    "compatibility": suite_compatibility,
    "energy": suite_energy,
}


def run_suite(name: str, seed: int | None = None, jobs: int = 1) -> dict:
    if name != "all" and name not in SUITES:
        raise KeyError(name)
    seed = seed if seed is not None else seed_from_env()
    names = list(SUITES) if name == "all" else [name]
    out = {"suite": name, "seed": seed, "checks": [], "passed": True}
    for nm in names:
        fn = SUITES[nm]
        checks = fn(seed, jobs) if nm == "dynamics" else fn(seed)
        for c in checks:
            c["name"] = f"{nm}:{c['name']}"
        out["checks"].extend(checks)
    out["passed"] = all(c["passed"] for c in out["checks"])
    return out
