"""Command-line orchestration: configs in, trajectories/reports/figures out.

Exit codes: 0 success, 1 config or usage error, 2 numerical abort or suite
failure, 3 repair non-convergence.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import asdict

import numpy as np

from . import __version__
from .grid import make_grid, DiffOps, StringState
from .compat import initial_jet, check_compatibility
from .dataprep import repair_data, RepairError
from .dynamics import ScenarioConfig, simulate
from . import diagnostics, report, scenarios, verify


class ConfigError(ValueError):
    pass


_CONFIG_KEYS = {
    "scenario": str,
    "gravity": str,
    "n_cells": int,
    "t_end": float,
    "dt_policy": str,
    "dt": float,
    "cfl_safety": float,
    "mode": str,
    "snap_stride": int,
    "diff_order": int,
    "omega": float,
    "amplitude": float,
    "mode_number": int,
    "initial_data": str,
}


def parse_config_file(path) -> dict:
    """Flat key = value text; # starts a comment; errors carry line numbers."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.rstrip()!r}")
            key, val = (part.strip() for part in line.split("=", 1))
            if key not in _CONFIG_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                out[key] = _CONFIG_KEYS[key](val)
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from exc
    return out


_SCENARIO_DEFAULTS = {
    "equilibrium": {"gravity": "0,0,-1", "t_end": 1.0},
    "rotating": {"gravity": "0,0,0", "t_end": 1.0},
    "chain-mode-1": {"gravity": "0,0,-1", "mode_number": 1},
    "chain-mode-2": {"gravity": "0,0,-1", "mode_number": 2},
    "curved": {"gravity": "0,0,-1", "t_end": 1.0},
}


def build_run(raw: dict):
    """Translate a raw config dict into (ScenarioConfig, initial state, grid)."""
    name = raw.get("scenario", "")
    if name and name not in _SCENARIO_DEFAULTS and "initial_data" not in raw:
        raise ConfigError(
            f"unknown scenario {name!r}; builtins: {sorted(_SCENARIO_DEFAULTS)}")
    merged = dict(_SCENARIO_DEFAULTS.get(name, {}))
    merged.update(raw)

    gvec = merged.get("gravity", "0,0,-1")
    try:
        gravity = tuple(float(p) for p in str(gvec).split(","))
        if len(gravity) != 3:
            raise ValueError("need three components")
    except ValueError as exc:
        raise ConfigError(f"bad gravity {gvec!r}: {exc}") from exc

    cfg = ScenarioConfig(
        gravity=gravity,
        n_cells=int(merged.get("n_cells", 128)),
        t_end=float(merged.get("t_end", 1.0)),
        dt_policy=str(merged.get("dt_policy", "cfl")),
        dt=float(merged.get("dt", 1e-3)),
        cfl_safety=float(merged.get("cfl_safety", 0.5)),
        mode=str(merged.get("mode", "project")),
        snap_stride=int(merged.get("snap_stride", 10)),
        diff_order=int(merged.get("diff_order", 2)),
        scenario=name,
    )
    try:
        cfg.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    grid = make_grid(cfg.n_cells)
    omega = float(merged.get("omega", 1.0))
    if "initial_data" in merged:
        state = StringState.read_csv(merged["initial_data"])
        if state.x.shape[0] != grid.n_nodes:
            raise ConfigError(
                f"initial data has {state.x.shape[0]} rows, grid wants {grid.n_nodes}")
    elif name == "equilibrium":
        state = scenarios.equilibrium_state(grid)
    elif name == "rotating":
        state = scenarios.rotating_state(grid, omega=omega)
    elif name in ("chain-mode-1", "chain-mode-2"):
        k = int(merged.get("mode_number", 1))
        amp = float(merged.get("amplitude", 1e-3))
        state, omega_lin = scenarios.chain_mode_state(grid, k, amp)
        if "t_end" not in merged:
            cfg.t_end = 3.2 * 2 * np.pi / omega_lin
    elif name == "curved":
        state = scenarios.curved_state(grid)
    else:
        raise ConfigError("no scenario and no initial_data given")
    return cfg, state, grid, omega


def cmd_simulate(args) -> int:
    raw = {}
    try:
        if args.config:
            raw = parse_config_file(args.config)
        if args.scenario:
            raw["scenario"] = args.scenario
        if args.t_end is not None:
            raw["t_end"] = args.t_end
        if args.n_cells is not None:
            raw["n_cells"] = args.n_cells
        cfg, state, grid, omega = build_run(raw)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    out_dir = args.out or f"run_{cfg.scenario or 'custom'}"
    os.makedirs(out_dir, exist_ok=True)
    t0 = time.perf_counter()
    record = simulate(cfg, state)
    g = np.asarray(cfg.gravity)
    try:
        diagnostics.attach_energies(record, g, grid)
    except ValueError:
        pass
    files = record.save(out_dir, grid)
    fig_dir = os.path.join(out_dir, "figures")
    os.makedirs(fig_dir, exist_ok=True)
    report.fig_diagnostics(record, os.path.join(fig_dir, "diagnostics.png"))
    report.fig_profiles(record, grid, os.path.join(fig_dir, "profiles.png"))
    files += ["figures/diagnostics.png", "figures/profiles.png"]
    wall = time.perf_counter() - t0

    status = "aborted" if record.aborted else "ok"
    manifest = {
        "config": asdict(cfg),
        "version": __version__,
        "wall_time_s": wall,
        "outputs": sorted(files),
        "status": status,
        "error": record.error,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)

    if cfg.scenario == "rotating" and not record.aborted:
        ref = scenarios.rotating_state(grid, omega=omega, t=record.times[-1])
        err = float(np.max(np.abs(record.states[-1].x - ref.x)))
        print(f"final-error vs closed form at t={record.times[-1]:.6g}: {err:.3e}")
    if record.aborted:
        print(f"numerical abort: {record.error}", file=sys.stderr)
        return 2
    print(f"wrote {out_dir} ({len(record.times)} snapshots, {wall:.2f} s)")
    return 0


def cmd_check_data(args) -> int:
    try:
        state = StringState.read_csv(args.data)
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    n_cells = state.x.shape[0] - 1
    try:
        grid = make_grid(n_cells)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    ops = DiffOps(grid)
    g = tuple(float(p) for p in args.gravity.split(","))
    m = args.order
    jet = initial_jet(state.x, state.v, g, m, grid, ops)
    passed, res = check_compatibility(jet, m - 1, args.tol)
    for j, r in enumerate(res):
        print(f"order={j} residual={r:.3e}")
    if passed:
        print("PASS")
    else:
        worst = int(np.argmax(res > args.tol))
        print(f"FAIL order={worst} residual={res[worst]:.3e}")

    if not args.repair:
        return 0
    mode = "constrained" if args.constrained else "free"
    try:
        x0s, x1s, rep = repair_data(state.x, state.v, g, m, grid,
                                    mode=mode, tol=args.tol)
    except RepairError as exc:
        print(f"repair failed: {exc}", file=sys.stderr)
        return 3
    out = args.out or (os.path.splitext(args.data)[0] + ".repaired.csv")
    StringState(x=x0s, v=x1s).write_csv(out)
    rep_path = os.path.splitext(out)[0] + ".report.json"
    serializable = {k: v for k, v in rep.items() if not isinstance(v, np.ndarray)}
    with open(rep_path, "w") as fh:
        json.dump(serializable, fh, indent=2)
    print(f"repaired data written to {out} "
          f"(iters={rep['newton_iters']}, correction={rep['correction_norm']:.3e})")
    return 0


def cmd_verify(args) -> int:
    try:
        result = verify.run_suite(args.suite, jobs=args.jobs)
    except KeyError:
        print(f"unknown suite {args.suite!r}; choose from "
              f"{sorted(verify.SUITES) + ['all']}", file=sys.stderr)
        return 1
    text = json.dumps(result, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    if not result["passed"]:
        failed = [c["name"] for c in result["checks"] if not c["passed"]]
        print(f"FAILED checks: {failed}", file=sys.stderr)
        return 2
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="string-lab",
                                 description="hanging-string numerical laboratory")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario and write a trajectory directory")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--scenario", help="builtin scenario name")
    p.add_argument("--t-end", type=float, dest="t_end")
    p.add_argument("--n-cells", type=int, dest="n_cells")
    p.add_argument("--out", help="output directory")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("check-data", help="compatibility residuals of a data CSV")
    p.add_argument("data", help="CSV with columns s,x1,x2,x3,v1,v2,v3")
    p.add_argument("--order", type=int, default=4, help="jet order m (checks up to m-1)")
    p.add_argument("--repair", action="store_true")
    p.add_argument("--constrained", action="store_true")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--gravity", default="0,0,-1")
    p.add_argument("--out", help="path for the repaired CSV")
    p.set_defaults(fn=cmd_check_data)

    p = sub.add_parser("verify", help="run a self-check suite")
    p.add_argument("suite", help="norms|tension|dynamics|compatibility|energy|all")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", help="write the JSON summary here too")
    p.set_defaults(fn=cmd_verify)

    args = ap.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
