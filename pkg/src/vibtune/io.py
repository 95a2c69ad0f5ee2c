"""Scenario configuration files, result serialization and run manifests.

Configs are YAML with fixed sections; every key is checked and unknown keys
are rejected before any simulation starts.  CSV output uses 17 significant
digits so re-runs from the same config are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np
import yaml

from .control import PdGains, TrackingControllerConfig
from .engine import IntegratorConfig
from .frf import ExcitationGrid, FrfMatrix
from .mdof import MdofSystem
from .satellite import RwDisturbanceModel, SatelliteParams
from .tuning import AdaptationConfig, TuningHistory

__all__ = [
    "ConfigError",
    "ScenarioConfig",
    "load_config",
    "parse_grid_override",
    "format_float",
    "write_frf_csv",
    "write_trajectory_csv",
    "write_history_csv",
    "write_history_json",
    "write_gains_json",
    "read_gains_json",
    "write_json",
    "sha256_file",
    "RunManifest",
]


class ConfigError(Exception):
    """Raised when a scenario file is missing, malformed or off-schema."""


def format_float(x) -> str:
    """Round-trip decimal form used in every CSV cell."""
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# Config loading
# ---------------------------------------------------------------------------


def _pop(section: dict, key: str, default=None, required: bool = False, where: str = ""):
    if key in section:
        return section.pop(key)
    if required:
        raise ConfigError(f"missing required key '{where}{key}'")
    return default


def _reject_unknown(section: dict, where: str):
    if section:
        bad = ", ".join(sorted(str(k) for k in section))
        raise ConfigError(f"unknown key(s) in {where or 'top level'}: {bad}")


def _grid_axis(raw, where: str) -> np.ndarray:
    if isinstance(raw, (list, tuple)):
        return np.asarray(raw, dtype=float)
    if isinstance(raw, dict):
        raw = dict(raw)
        start = _pop(raw, "start", required=True, where=where)
        stop = _pop(raw, "stop", required=True, where=where)
        step = _pop(raw, "step", required=True, where=where)
        _reject_unknown(raw, where)
        count = int(round((float(stop) - float(start)) / float(step))) + 1
        return float(start) + float(step) * np.arange(count)
    raise ConfigError(f"{where} must be a list or a start/stop/step mapping")


def parse_grid_override(text: str) -> ExcitationGrid:
    """Parse the CLI form "a0:a1:da,w0:w1:dw" into a grid."""
    try:
        amp_part, freq_part = text.split(",")
        a0, a1, da = (float(v) for v in amp_part.split(":"))
        w0, w1, dw = (float(v) for v in freq_part.split(":"))
    except ValueError as err:
        raise ConfigError(f"bad grid override {text!r}: expected a0:a1:da,w0:w1:dw") from err
    try:
        return ExcitationGrid.from_ranges(a0, a1, da, w0, w1, dw)
    except ValueError as err:
        raise ConfigError(f"bad grid override {text!r}: {err}") from err


@dataclass
class ScenarioConfig:
    """Fully parsed scenario: model family plus per-command settings."""

    kind: str
    seed: int
    output_dir: str
    grid: ExcitationGrid
    integrator: IntegratorConfig
    adaptation: AdaptationConfig
    probe: bool
    probe_horizon: float
    probe_tol: float
    warm_start: bool
    failure_action: str
    system: MdofSystem = None
    satellite: SatelliteParams = None
    tracking: TrackingControllerConfig = None
    q_d: np.ndarray = None
    influence: np.ndarray = None
    disturbance: RwDisturbanceModel = None
    rms_horizon: float = 600.0
    rms_step: float = 0.05
    convergence: dict = field(default_factory=dict)
    simulate: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    def make_plant(self, gains: PdGains = None):
        from .control import MdofPlant, SatellitePlant

        if self.kind == "mdof":
            return MdofPlant(self.system, gains)
        return SatellitePlant(self.satellite, self.tracking, gains,
                              q_d=self.q_d, influence=self.influence)


def _load_mdof_block(section: dict) -> MdofSystem:
    where = "system."
    mass = _pop(section, "mass", required=True, where=where)
    damping = _pop(section, "damping", required=True, where=where)
    stiffness = _pop(section, "stiffness", required=True, where=where)
    nonlinear = _pop(section, "nonlinear", default=None)
    lam = _pop(section, "lam", default=None)
    gam = _pop(section, "gam", default=None)
    _reject_unknown(section, "system")
    nl = None
    if nonlinear is not None:
        nl = [[(int(p), float(b)) for p, b in dof] for dof in nonlinear]
    try:
        return MdofSystem(np.atleast_2d(np.asarray(mass, dtype=float)),
                          np.atleast_2d(np.asarray(damping, dtype=float)),
                          np.atleast_2d(np.asarray(stiffness, dtype=float)),
                          nonlin=nl,
                          lam=None if lam is None else np.asarray(lam, dtype=float),
                          gam=None if gam is None else np.atleast_2d(np.asarray(gam, dtype=float)))
    except ValueError as err:
        raise ConfigError(f"invalid system block: {err}") from err


def _load_satellite_block(section: dict):
    where = "satellite."
    inertia = _pop(section, "inertia", required=True, where=where)
    q_d = _pop(section, "q_d", default=[1.0, 0.5, 0.0])
    influence = _pop(section, "influence", default=[1.0, 1.0, 1.0])
    tracking = dict(_pop(section, "tracking", default={}))
    _reject_unknown(section, "satellite")
    lambda_r = _pop(tracking, "lambda_r", default=0.05)
    k_r = _pop(tracking, "k_r", default=12.0)
    _reject_unknown(tracking, "satellite.tracking")
    try:
        params = SatelliteParams(np.asarray(inertia, dtype=float))
        track = TrackingControllerConfig(np.asarray(lambda_r, dtype=float),
                                         np.asarray(k_r, dtype=float))
    except ValueError as err:
        raise ConfigError(f"invalid satellite block: {err}") from err
    return params, track, np.asarray(q_d, dtype=float), np.asarray(influence, dtype=float)


def load_config(path: str) -> ScenarioConfig:
    """Parse and validate a scenario file; raise ConfigError on any problem."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError as err:
        raise ConfigError(f"config file not found: {path}") from err
    except yaml.YAMLError as err:
        raise ConfigError(f"cannot parse {path}: {err}") from err
    if not isinstance(raw, dict):
        raise ConfigError(f"{path} must contain a mapping at top level")
    snapshot = json.loads(json.dumps(raw))
    top = dict(raw)

    kind = _pop(top, "kind", required=True, where="")
    if kind not in ("mdof", "satellite"):
        raise ConfigError(f"kind must be 'mdof' or 'satellite', got {kind!r}")
    seed = int(_pop(top, "seed", default=0))
    output_dir = _pop(top, "output_dir", default="runs")

    grid_sec = _pop(top, "grid", required=True, where="")
    if not isinstance(grid_sec, dict):
        raise ConfigError("grid must be a mapping")
    grid_sec = dict(grid_sec)
    amps = _grid_axis(_pop(grid_sec, "amplitudes", required=True, where="grid."),
                      "grid.amplitudes")
    freqs = _grid_axis(_pop(grid_sec, "frequencies", required=True, where="grid."),
                       "grid.frequencies")
    _reject_unknown(grid_sec, "grid")
    try:
        grid = ExcitationGrid(amps, freqs)
    except ValueError as err:
        raise ConfigError(f"invalid grid: {err}") from err

    integ_sec = dict(_pop(top, "integrator", default={}))
    integ_kw = {}
    for key in ("step_h", "max_periods", "ss_rel_tol", "measure_periods",
                "min_transient_periods", "eps_floor"):
        if key in integ_sec:
            val = integ_sec.pop(key)
            integ_kw[key] = int(val) if key in ("max_periods", "measure_periods",
                                                "min_transient_periods") else float(val)
    _reject_unknown(integ_sec, "integrator")
    try:
        integrator = IntegratorConfig(**integ_kw)
    except ValueError as err:
        raise ConfigError(f"invalid integrator config: {err}") from err

    adapt_sec = dict(_pop(top, "adaptation", default={}))
    probe = bool(_pop(adapt_sec, "probe", default=True))
    probe_horizon = float(_pop(adapt_sec, "probe_horizon", default=60.0))
    probe_tol = float(_pop(adapt_sec, "probe_tol", default=1e-3))
    adapt_kw = {}
    for key in ("gamma_p", "gamma_d", "delta_x1", "delta_x2", "theta_min",
                "eps_tol", "max_iterations", "max_step_abs", "max_step_rel"):
        if key in adapt_sec:
            val = adapt_sec.pop(key)
            if key == "theta_min":
                val = tuple(val) if isinstance(val, (list, tuple)) else (float(val), float(val))
            elif key == "max_iterations":
                val = int(val)
            elif key in ("eps_tol", "max_step_abs", "max_step_rel"):
                val = float(val)
            adapt_kw[key] = val
    _reject_unknown(adapt_sec, "adaptation")
    try:
        adaptation = AdaptationConfig(**adapt_kw)
    except ValueError as err:
        raise ConfigError(f"invalid adaptation config: {err}") from err

    sweep_sec = dict(_pop(top, "sweep", default={}))
    warm_start = bool(_pop(sweep_sec, "warm_start", default=True))
    failure_action = _pop(sweep_sec, "failure_action", default="abort")
    _reject_unknown(sweep_sec, "sweep")
    if failure_action not in ("abort", "keep"):
        raise ConfigError(f"sweep.failure_action must be abort or keep, got {failure_action!r}")

    system = None
    satellite = tracking = q_d = influence = None
    if kind == "mdof":
        sys_sec = _pop(top, "system", required=True, where="")
        if not isinstance(sys_sec, dict):
            raise ConfigError("system must be a mapping")
        system = _load_mdof_block(dict(sys_sec))
    else:
        sat_sec = _pop(top, "satellite", required=True, where="")
        if not isinstance(sat_sec, dict):
            raise ConfigError("satellite must be a mapping")
        satellite, tracking, q_d, influence = _load_satellite_block(dict(sat_sec))

    disturbance = None
    rms_horizon, rms_step = 600.0, 0.05
    dist_sec = _pop(top, "disturbance", default=None)
    if dist_sec is not None:
        dist_sec = dict(dist_sec)
        harmonics = _pop(dist_sec, "harmonics",
                         default=[[1.0, 1e-4], [2.0, 5e-5], [5.8, 2e-5]])
        wheel_speed = float(_pop(dist_sec, "wheel_speed", default=1.0))
        speed_unit = _pop(dist_sec, "speed_unit", default="rev_per_s")
        rms_horizon = float(_pop(dist_sec, "rms_horizon", default=600.0))
        rms_step = float(_pop(dist_sec, "rms_step", default=0.05))
        _reject_unknown(dist_sec, "disturbance")
        try:
            disturbance = RwDisturbanceModel([(float(h), float(a)) for h, a in harmonics],
                                             wheel_speed, speed_unit, seed=seed)
        except (ValueError, TypeError) as err:
            raise ConfigError(f"invalid disturbance block: {err}") from err

    conv_sec = dict(_pop(top, "convergence", default={}))
    conv = {
        "initial_positions": [float(v) for v in _pop(conv_sec, "initial_positions",
                                                     default=[-3.0, 3.0, 5.0])],
        "amplitude": float(_pop(conv_sec, "amplitude", default=2.0)),
        "frequency": float(_pop(conv_sec, "frequency", default=6.0)),
        "horizon": float(_pop(conv_sec, "horizon", default=60.0)),
        "distance_tol": float(_pop(conv_sec, "distance_tol", default=1e-3)),
        "state_box": float(_pop(conv_sec, "state_box", default=5.0)),
        "n_samples": int(_pop(conv_sec, "n_samples", default=256)),
        "transform": _pop(conv_sec, "transform", default="default"),
        "conservation_horizon": float(_pop(conv_sec, "conservation_horizon", default=100.0)),
        "conservation_step": float(_pop(conv_sec, "conservation_step", default=1e-3)),
    }
    _reject_unknown(conv_sec, "convergence")
    if conv["transform"] not in ("default", "none"):
        raise ConfigError("convergence.transform must be 'default' or 'none'")

    sim_sec = dict(_pop(top, "simulate", default={}))
    simulate = {
        "amplitude": float(_pop(sim_sec, "amplitude", default=6.0)),
        "frequency": float(_pop(sim_sec, "frequency", default=6.0)),
        "horizon": float(_pop(sim_sec, "horizon", default=60.0)),
    }
    _reject_unknown(sim_sec, "simulate")

    _reject_unknown(top, "top level")
    return ScenarioConfig(
        kind=kind, seed=seed, output_dir=output_dir, grid=grid,
        integrator=integrator, adaptation=adaptation, probe=probe,
        probe_horizon=probe_horizon, probe_tol=probe_tol,
        warm_start=warm_start, failure_action=failure_action,
        system=system, satellite=satellite, tracking=tracking,
        q_d=q_d, influence=influence, disturbance=disturbance,
        rms_horizon=rms_horizon, rms_step=rms_step,
        convergence=conv, simulate=simulate, raw=snapshot,
    )


# ---------------------------------------------------------------------------
# Writers
# ---------------------------------------------------------------------------


def write_frf_csv(path: str, frf: FrfMatrix):
    """Rows = amplitudes, columns = frequencies; the header row/column carry
    the grid values.  Failed cells (if kept) appear as nan."""
    lines = ["amplitude\\frequency," + ",".join(format_float(w) for w in frf.frequencies)]
    for i, a in enumerate(frf.amplitudes):
        cells = ",".join(format_float(g) for g in frf.gains[i])
        lines.append(format_float(a) + "," + cells)
    _atomic_write_text(path, "\n".join(lines) + "\n")


def write_trajectory_csv(path: str, times, columns: dict):
    """columns maps header name -> 1-D array aligned with times."""
    names = list(columns)
    arrays = [np.asarray(columns[n], dtype=float) for n in names]
    lines = ["t," + ",".join(names)]
    for i, t in enumerate(times):
        lines.append(format_float(t) + "," + ",".join(format_float(arr[i]) for arr in arrays))
    _atomic_write_text(path, "\n".join(lines) + "\n")


def _history_columns(history: TuningHistory):
    keys = []
    for rec in history.records:
        for key in rec:
            if key not in keys:
                keys.append(key)
    cols = []
    for key in keys:
        probe = next((rec[key] for rec in history.records if key in rec), None)
        if isinstance(probe, list):
            for j in range(len(probe)):
                cols.append((f"{key}_{j + 1}", key, j))
        else:
            cols.append((key, key, None))
    return cols


def write_history_csv(path: str, history: TuningHistory):
    cols = _history_columns(history)
    lines = [",".join(name for name, _, _ in cols)]
    for rec in history.records:
        cells = []
        for _, key, j in cols:
            if key not in rec:
                cells.append("")
                continue
            val = rec[key] if j is None else rec[key][j]
            cells.append(format_float(val) if isinstance(val, float) else str(val))
        lines.append(",".join(cells))
    _atomic_write_text(path, "\n".join(lines) + "\n")


def write_history_json(path: str, history: TuningHistory):
    write_json(path, history.to_dict())


def write_gains_json(path: str, gains: PdGains, status: str = None):
    thp, thd = gains.diag_parts()
    payload = {
        "theta_p": gains.theta_p.tolist(),
        "theta_d": gains.theta_d.tolist(),
        "theta_p_diag": thp.tolist(),
        "theta_d_diag": thd.tolist(),
    }
    if status is not None:
        payload["status"] = status
    write_json(path, payload)


def read_gains_json(path: str) -> PdGains:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    return PdGains(np.asarray(payload["theta_p"], dtype=float),
                   np.asarray(payload["theta_d"], dtype=float))


def write_json(path: str, payload: dict):
    _atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _atomic_write_text(path, text: str):
    tmp = os.fspath(path) + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class RunManifest:
    """Reproducibility record written at the end of every CLI run."""

    command: str
    status: str
    seed: int
    config: dict
    wall_clock_s: float
    files: dict = field(default_factory=dict)

    def add_file(self, directory: str, name: str):
        self.files[name] = "sha256:" + sha256_file(os.path.join(directory, name))

    def write(self, directory: str):
        from . import __version__

        payload = {
            "tool": "vibtune",
            "version": __version__,
            "command": self.command,
            "status": self.status,
            "seed": self.seed,
            "wall_clock_s": self.wall_clock_s,
            "config": self.config,
            "files": self.files,
        }
        write_json(os.path.join(directory, "manifest.json"), payload)
