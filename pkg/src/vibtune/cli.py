"""Command-line entry points: frf, tune, simulate, converge-check.

Exit codes: 0 success, 2 config/parse problem, 3 divergence or sweep
failure, 4 tuner stopped at max-iterations.  Every command writes a
manifest.json with sha256 checksums of its outputs; re-running the same
config and seed reproduces the CSVs byte for byte.
"""

from __future__ import annotations

import argparse
import importlib.resources
import os
import sys
import time

import numpy as np

from .control import PdGains, pd_control
from .convergence import sample_region_check
from .engine import DivergenceError, IntegratorConfig, integrate, multi_ic_convergence
from .frf import SweepFailure, frf_sweep
from .io import (ConfigError, RunManifest, load_config, parse_grid_override,
                 read_gains_json, write_frf_csv, write_gains_json,
                 write_history_csv, write_history_json, write_json,
                 write_trajectory_csv)
from .satellite import (RwDisturbanceModel, kinetic_energy_body,
                        propagate_satellite)
from .tuning import tune

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_MAX_ITER = 4

PRESETS = ("duffing-linear", "duffing-nonlinear-36", "duffing-nonlinear-100",
           "satellite-rw")


def _resolve_config(path: str) -> str:
    """Accept either a file path or the name of a shipped preset."""
    if os.path.exists(path):
        return path
    name = path[:-5] if path.endswith(".yaml") else path
    if name in PRESETS:
        ref = importlib.resources.files("vibtune") / "presets" / f"{name}.yaml"
        return str(ref)
    return path


def _apply_overrides(cfg, args):
    if args.seed is not None:
        cfg.seed = args.seed
        if cfg.disturbance is not None:
            old = cfg.disturbance
            cfg.disturbance = RwDisturbanceModel(old.harmonics, old.wheel_speed,
                                                 old.speed_unit, seed=args.seed)
    if args.out is not None:
        cfg.output_dir = args.out
    if getattr(args, "grid_override", None):
        cfg.grid = parse_grid_override(args.grid_override)
    if getattr(args, "no_warm_start", False):
        cfg.warm_start = False
    return cfg


def _outdir(cfg) -> str:
    os.makedirs(cfg.output_dir, exist_ok=True)
    return cfg.output_dir


def _jobs(args) -> int:
    if getattr(args, "jobs", None):
        return max(1, args.jobs)
    return os.cpu_count() or 1


def cmd_frf(cfg, args) -> int:
    t0 = time.time()
    plant = cfg.make_plant()
    out = _outdir(cfg)
    try:
        mats = frf_sweep(plant, cfg.grid, cfg.integrator,
                         warm_start=cfg.warm_start, jobs=_jobs(args),
                         failure_action=cfg.failure_action)
    except SweepFailure as err:
        print(f"frf: {err}", file=sys.stderr)
        return EXIT_DIVERGED
    manifest = RunManifest("frf", "success", cfg.seed, cfg.raw, 0.0)
    for label, frf in zip(plant.channel_labels, mats):
        name = f"frf_{label}.csv"
        write_frf_csv(os.path.join(out, name), frf)
        manifest.add_file(out, name)
    manifest.wall_clock_s = time.time() - t0
    manifest.write(out)
    return EXIT_OK


def cmd_tune(cfg, args) -> int:
    t0 = time.time()
    plant = cfg.make_plant()
    out = _outdir(cfg)
    try:
        gains, history = tune(plant, cfg.grid, cfg.integrator, cfg.adaptation,
                              warm_start=cfg.warm_start, jobs=_jobs(args),
                              probe=cfg.probe, probe_horizon=cfg.probe_horizon,
                              probe_tol=cfg.probe_tol)
    except RuntimeError as err:
        print(f"tune: {err}", file=sys.stderr)
        return EXIT_DIVERGED
    manifest = RunManifest("tune", history.status, cfg.seed, cfg.raw, 0.0)
    write_history_csv(os.path.join(out, "tuning_history.csv"), history)
    write_history_json(os.path.join(out, "tuning_history.json"), history)
    write_gains_json(os.path.join(out, "gains.json"), gains, history.status)
    for name in ("tuning_history.csv", "tuning_history.json", "gains.json"):
        manifest.add_file(out, name)
    manifest.wall_clock_s = time.time() - t0
    manifest.write(out)
    if history.status == "converged":
        return EXIT_OK
    print(f"tune: stopped with status {history.status}", file=sys.stderr)
    return EXIT_MAX_ITER if history.status == "max-iterations" else EXIT_DIVERGED


def _simulate_mdof_case(cfg, gains: PdGains, case: str, out: str, manifest):
    plant = cfg.make_plant(gains)
    a = cfg.simulate["amplitude"]
    omega = cfg.simulate["frequency"]
    horizon = cfg.simulate["horizon"]
    n = cfg.system.n_q
    rhs = plant._closure(a, omega)
    g = plant.gains

    traj = integrate(rhs, plant.default_x0(), (0.0, horizon), cfg.integrator,
                     w_log=lambda t: np.array([a * np.sin(omega * t)]),
                     u_log=lambda t, x: pd_control(g, x[:n], x[n:]))
    columns = {}
    for i in range(n):
        columns[f"x{i + 1}" if n > 1 else "x1"] = traj.states[:, i]
    for i in range(n):
        columns[f"x{i + 1}dot" if n > 1 else "x2"] = traj.states[:, n + i]
    columns["w"] = traj.w[:, 0]
    for i in range(n):
        columns[f"u{i + 1}" if n > 1 else "u"] = traj.u[:, i]
    name = f"trajectory_{case}.csv"
    write_trajectory_csv(os.path.join(out, name), traj.times, columns)
    manifest.add_file(out, name)
    q_peak = float(np.max(np.abs(traj.states[len(traj.times) // 2:, :n])))
    return q_peak


def _simulate_satellite_case(cfg, gains: PdGains, case: str, out: str, manifest):
    plant = cfg.make_plant(gains)
    dist = cfg.disturbance
    if dist is None:
        raise ConfigError("satellite simulate requires a disturbance block")
    amps, oms, phs = dist.component_arrays()
    times, trace = plant.error_trace(amps, oms, phs, cfg.rms_horizon, cfg.rms_step)
    columns = {}
    for i in range(3):
        columns[f"e{i + 1}"] = trace[:, i]
    for i in range(3):
        columns[f"edot{i + 1}"] = trace[:, 3 + i]
    columns["w"] = np.array([np.sum(amps * np.sin(oms * t + phs)) for t in times])
    thp, thd = plant.gains.theta_p, plant.gains.theta_d
    u = -(trace[:, :3] @ thp.T) - (trace[:, 3:] @ thd.T)
    for i in range(3):
        columns[f"u{i + 1}"] = u[:, i]
    name = f"trajectory_{case}.csv"
    write_trajectory_csv(os.path.join(out, name), times, columns)
    manifest.add_file(out, name)
    skip = len(times) // 2
    return float(np.sqrt(np.mean(np.sum(trace[skip:, :3] ** 2, axis=1))))


def cmd_simulate(cfg, args) -> int:
    t0 = time.time()
    out = _outdir(cfg)
    n = cfg.system.n_q if cfg.kind == "mdof" else 3
    zero = PdGains.diagonal(np.zeros(n), np.zeros(n))
    gains = read_gains_json(args.gains) if args.gains else None
    manifest = RunManifest("simulate", "success", cfg.seed, cfg.raw, 0.0)
    runner = _simulate_mdof_case if cfg.kind == "mdof" else _simulate_satellite_case
    try:
        metrics = {"uncontrolled": runner(cfg, zero, "uncontrolled", out, manifest)}
        if gains is not None:
            metrics["controlled"] = runner(cfg, gains, "controlled", out, manifest)
    except DivergenceError as err:
        print(f"simulate: {err}", file=sys.stderr)
        return EXIT_DIVERGED
    metric_name = "peak_displacement" if cfg.kind == "mdof" else "error_rms"
    summary = {metric_name: metrics}
    if len(metrics) == 2 and metrics["uncontrolled"] > 0:
        summary["reduction"] = 1.0 - metrics["controlled"] / metrics["uncontrolled"]
    write_json(os.path.join(out, "simulation_summary.json"), summary)
    manifest.add_file(out, "simulation_summary.json")
    manifest.wall_clock_s = time.time() - t0
    manifest.write(out)
    return EXIT_OK


def _converge_check_mdof(cfg, args, out: str, manifest) -> dict:
    gains = read_gains_json(args.gains) if args.gains else None
    transform = "default" if cfg.convergence["transform"] == "default" else None
    box = cfg.convergence["state_box"] * np.ones(2 * cfg.system.n_q)
    jac = sample_region_check(cfg.system, gains,
                              state_box=(-box, box),
                              n_samples=cfg.convergence["n_samples"],
                              transform=transform, seed=cfg.seed)
    plant = cfg.make_plant(gains)
    a = cfg.convergence["amplitude"]
    omega = cfg.convergence["frequency"]
    n = cfg.system.n_q
    ics = [np.concatenate([p * np.ones(n), np.zeros(n)])
           for p in cfg.convergence["initial_positions"]]
    rep = multi_ic_convergence(plant._closure(a, omega), 2.0 * np.pi / omega,
                               ics, cfg.convergence["horizon"], cfg.integrator)
    return {
        "jacobian": jac.to_dict(),
        "multi_ic": {
            "terminal_max_distance": rep.terminal_max_distance,
            "decay_rate": rep.decay_rate,
            "distance_tol": cfg.convergence["distance_tol"],
            "passed": bool(rep.terminal_max_distance < cfg.convergence["distance_tol"]),
        },
    }


def _converge_check_satellite(cfg, args, out: str, manifest) -> dict:
    h = cfg.convergence["conservation_step"]
    horizon = cfg.convergence["conservation_horizon"]
    rng = np.random.default_rng(cfg.seed)
    y0 = np.concatenate([0.2 * rng.standard_normal(3), 0.5 * rng.standard_normal(3)])
    traj = propagate_satellite(cfg.satellite, y0, (0.0, horizon),
                               IntegratorConfig(step_h=h))
    e0 = kinetic_energy_body(cfg.satellite, y0[3:])
    energies = np.array([kinetic_energy_body(cfg.satellite, s[3:]) for s in traj.states])
    h_norm = np.array([np.linalg.norm(cfg.satellite.inertia @ s[3:]) for s in traj.states])
    gains = read_gains_json(args.gains) if args.gains else None
    plant = cfg.make_plant(gains)
    a = cfg.convergence["amplitude"]
    omega = cfg.convergence["frequency"]
    dynamics, period, ics = plant.probe_setup(a, omega)
    rep = multi_ic_convergence(dynamics, period, ics,
                               cfg.convergence["horizon"], cfg.integrator)
    return {
        "conservation": {
            "energy_drift_rel": float(np.max(np.abs(energies - e0)) / e0),
            "momentum_drift_rel": float(np.max(np.abs(h_norm - h_norm[0])) / h_norm[0]),
            "horizon": horizon,
            "step_h": h,
        },
        "multi_ic": {
            "terminal_max_distance": rep.terminal_max_distance,
            "decay_rate": rep.decay_rate,
            "distance_tol": cfg.convergence["distance_tol"],
            "passed": bool(rep.terminal_max_distance < cfg.convergence["distance_tol"]),
        },
    }


def cmd_converge_check(cfg, args) -> int:
    t0 = time.time()
    out = _outdir(cfg)
    manifest = RunManifest("converge-check", "success", cfg.seed, cfg.raw, 0.0)
    try:
        if cfg.kind == "mdof":
            report = _converge_check_mdof(cfg, args, out, manifest)
        else:
            report = _converge_check_satellite(cfg, args, out, manifest)
    except DivergenceError as err:
        print(f"converge-check: {err}", file=sys.stderr)
        return EXIT_DIVERGED
    write_json(os.path.join(out, "convergence_report.json"), report)
    manifest.add_file(out, "convergence_report.json")
    manifest.wall_clock_s = time.time() - t0
    manifest.write(out)
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vibtune",
        description="Nonlinear FRF sweeps and FRF-driven PD gain tuning.")
    sub = parser.add_subparsers(dest="command", required=True)
    specs = {
        "frf": "sweep the excitation grid and write one FRF CSV per channel",
        "tune": "run the adaptive gain tuning loop",
        "simulate": "time-domain run(s) at a fixed excitation",
        "converge-check": "Jacobian sampling and multi-IC convergence diagnostics",
    }
    for name, help_text in specs.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", "-c", required=True,
                       help="scenario YAML path or preset name "
                            f"({', '.join(PRESETS)})")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--jobs", type=int, default=None,
                       help="parallel sweep workers (default: cpu count)")
        p.add_argument("--grid-override", default=None, metavar="a0:a1:da,w0:w1:dw",
                       help="replace the excitation grid")
        p.add_argument("--no-warm-start", action="store_true",
                       help="start every sweep cell from rest")
        if name in ("simulate", "converge-check"):
            p.add_argument("--gains", default=None,
                           help="gains.json from a tune run")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(_resolve_config(args.config))
        cfg = _apply_overrides(cfg, args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    handlers = {
        "frf": cmd_frf,
        "tune": cmd_tune,
        "simulate": cmd_simulate,
        "converge-check": cmd_converge_check,
    }
    try:
        return handlers[args.command](cfg, args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as err:
        print(f"divergence: {err}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    raise SystemExit(main())
