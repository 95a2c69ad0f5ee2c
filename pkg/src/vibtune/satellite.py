"""Rigid-body satellite attitude model in Modified Rodrigues Parameters.

Body dynamics H w' + w x (H w) = torque, kinematics q' = J(q) w, plus the
equivalent Lagrangian form H_s(q) q'' + C_s(q, q') q' = J^-T torque.  C_s is
assembled from Christoffel symbols of H_s so that dH_s/dt - 2 C_s is
skew-symmetric as a matrix, which the tracking-controller stability
argument relies on.  A reaction-wheel imbalance disturbance model rounds
out the module.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .engine import DivergenceError, IntegratorConfig, Trajectory, rk4_step

__all__ = [
    "SatelliteParams",
    "MrpAttitude",
    "RwDisturbanceModel",
    "skew",
    "mrp_kinematics_jacobian",
    "mrp_jacobian_rate",
    "mrp_shadow",
    "body_dynamics",
    "lagrangian_form",
    "mass_matrix_partials",
    "kinetic_energy",
    "kinetic_energy_body",
    "propagate_satellite",
    "rw_disturbance",
    "rw_excitation_cells",
]

# MRPs blow up at a full 2*pi rotation (||q|| -> inf); reject states well
# before conditioning degrades.  Norms above 1 are legitimate (rotations
# beyond 180 deg) and occur in the tracking scenarios.
MRP_NORM_LIMIT = 10.0


def skew(v) -> np.ndarray:
    """Cross-product matrix: skew(a) @ b == cross(a, b)."""
    x, y, z = np.asarray(v, dtype=float).ravel()
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


@dataclass
class SatelliteParams:
    """Inertia and bookkeeping for the rigid-body attitude model."""

    inertia: np.ndarray = field(default_factory=lambda: np.diag([10.0, 15.0, 20.0]))

    def __post_init__(self):
        h = np.asarray(self.inertia, dtype=float)
        if h.ndim == 1:
            h = np.diag(h)
        if h.shape != (3, 3):
            raise ValueError(f"inertia must be 3x3, got {h.shape}")
        ev = np.linalg.eigvalsh(0.5 * (h + h.T))
        if ev[0] <= 0:
            raise ValueError(f"inertia must be positive definite, eigenvalues {ev}")
        self.inertia = h
        self.inertia_inv = np.linalg.inv(h)

    @property
    def is_diagonal(self) -> bool:
        return np.count_nonzero(self.inertia - np.diag(np.diag(self.inertia))) == 0


@dataclass
class MrpAttitude:
    """Modified Rodrigues Parameter attitude coordinate."""

    q: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float).ravel()
        if self.q.shape != (3,):
            raise ValueError("MRP must be a 3-vector")
        if not np.all(np.isfinite(self.q)) or np.linalg.norm(self.q) >= MRP_NORM_LIMIT:
            raise ValueError(f"MRP out of domain (norm limit {MRP_NORM_LIMIT})")

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.q))

    def shadow(self) -> "MrpAttitude":
        return MrpAttitude(mrp_shadow(self.q))


def mrp_shadow(q) -> np.ndarray:
    """Shadow-set counterpart -q / (q.q) of the same physical attitude."""
    q = np.asarray(q, dtype=float)
    nn = float(q @ q)
    if nn == 0.0:
        raise ValueError("shadow set is undefined at q = 0")
    return -q / nn


def _check_mrp_domain(q) -> np.ndarray:
    q = np.asarray(q, dtype=float).ravel()
    if q.shape != (3,):
        raise ValueError("MRP must be a 3-vector")
    if not np.all(np.isfinite(q)) or np.linalg.norm(q) >= MRP_NORM_LIMIT:
        raise ValueError(
            f"MRP norm {np.linalg.norm(q):.3g} outside domain (< {MRP_NORM_LIMIT}); "
            "shadow-switch before the 2*pi singularity"
        )
    return q


def mrp_kinematics_jacobian(q) -> np.ndarray:
    """J(q) with q' = J(q) w; J = 0.25*((1-q.q) I + 2 skew(q) + 2 q q^T)."""
    q = _check_mrp_domain(q)
    return 0.25 * ((1.0 - q @ q) * np.eye(3) + 2.0 * skew(q) + 2.0 * np.outer(q, q))


def mrp_jacobian_rate(q, qdot) -> np.ndarray:
    """Analytic dJ/dt along (q, q'); same quadratic form with q -> pairs."""
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    return 0.25 * (
        -2.0 * (q @ qdot) * np.eye(3)
        + 2.0 * skew(qdot)
        + 2.0 * (np.outer(qdot, q) + np.outer(q, qdot))
    )


def _jacobian_partials(q) -> np.ndarray:
    """dJ/dq_k stacked over k; each slice 0.25*(-2 q_k I + 2 skew(e_k) + ...)."""
    q = np.asarray(q, dtype=float)
    out = np.empty((3, 3, 3))
    eye = np.eye(3)
    for k in range(3):
        ek = eye[k]
        out[k] = 0.25 * (
            -2.0 * q[k] * eye
            + 2.0 * skew(ek)
            + 2.0 * (np.outer(ek, q) + np.outer(q, ek))
        )
    return out


def body_dynamics(params: SatelliteParams, omega, torque) -> np.ndarray:
    """Euler rigid-body rate equation: w' = H^-1 (torque - w x H w)."""
    omega = np.asarray(omega, dtype=float)
    torque = np.asarray(torque, dtype=float)
    return params.inertia_inv @ (torque - np.cross(omega, params.inertia @ omega))


def mass_matrix_partials(params: SatelliteParams, q) -> tuple:
    """(H_s, dH_s/dq) with dH_s/dq_k = -(G_k^T H_s + H_s G_k), G_k = dJ/dq_k J^-1."""
    q = _check_mrp_domain(q)
    js = mrp_kinematics_jacobian(q)
    jinv = np.linalg.inv(js)
    hs = jinv.T @ params.inertia @ jinv
    dj = _jacobian_partials(q)
    dh = np.empty((3, 3, 3))
    for k in range(3):
        gk = dj[k] @ jinv
        dh[k] = -(gk.T @ hs + hs @ gk)
    return hs, dh


def lagrangian_form(params: SatelliteParams, q, qdot) -> tuple:
    """Configuration-space mass matrix and Coriolis matrix (H_s, C_s).

    C_s uses the Christoffel-symbol assembly, so C_s q' reproduces the
    body-frame Coriolis force while dH_s/dt - 2 C_s stays skew-symmetric
    for arbitrary vectors, not just along q'.
    """
    qdot = np.asarray(qdot, dtype=float)
    hs, dh = mass_matrix_partials(params, q)
    t1 = np.einsum("kij,k->ij", dh, qdot)
    t2 = np.einsum("jik,k->ij", dh, qdot)
    t3 = np.einsum("ijk,k->ij", dh, qdot)
    cs = 0.5 * (t1 + t2 - t3)
    return hs, cs


def kinetic_energy(params: SatelliteParams, q, qdot) -> float:
    """Rotational kinetic energy 0.5 q'^T H_s(q) q' in MRP coordinates."""
    qdot = np.asarray(qdot, dtype=float)
    hs, _ = mass_matrix_partials(params, q)
    return float(0.5 * qdot @ hs @ qdot)


def kinetic_energy_body(params: SatelliteParams, omega) -> float:
    omega = np.asarray(omega, dtype=float)
    return float(0.5 * omega @ params.inertia @ omega)


def propagate_satellite(params: SatelliteParams, y0, t_span, config: IntegratorConfig = None,
                        torque_fn=None, shadow_threshold: float = 1.0) -> Trajectory:
    """Fixed-step propagation of y = [q, w_body] with optional shadow switching.

    torque_fn(t, y) returns the applied body torque (default: torque-free).
    After each step the MRP is switched to its shadow set when its norm
    exceeds shadow_threshold; pass None to disable (tracking runs do, since
    their targets may legitimately sit beyond norm 1).
    """
    cfg = config or IntegratorConfig()
    y = np.asarray(y0, dtype=float).copy()
    t0, t1 = float(t_span[0]), float(t_span[1])
    h = cfg.step_h
    n_steps = int(np.ceil((t1 - t0) / h - 1e-12))
    times = t0 + h * np.arange(n_steps + 1)
    states = np.empty((n_steps + 1, 6))
    states[0] = y

    if torque_fn is None:
        torque_fn = lambda t, y: np.zeros(3)

    def rhs(t, y):
        q, w = y[:3], y[3:]
        return np.concatenate([
            mrp_kinematics_jacobian(q) @ w,
            body_dynamics(params, w, torque_fn(t, y)),
        ])

    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n_steps):
            y = rk4_step(rhs, times[i], y, h)
            if not np.all(np.isfinite(y)):
                raise DivergenceError(times[i] + h)
            if shadow_threshold is not None and np.linalg.norm(y[:3]) > shadow_threshold:
                y = np.concatenate([mrp_shadow(y[:3]), y[3:]])
            states[i + 1] = y
    return Trajectory(times, states)


@dataclass
class RwDisturbanceModel:
    """Reaction-wheel imbalance torque: sum_i A_i W^2 sin(2 pi h_i W t + a_i).

    harmonics are (h_i, A_i) pairs; wheel_speed W is interpreted per
    speed_unit ("rev_per_s" keeps the formula literal, "rad_per_s" is
    converted).  Phases default to a single draw from the seeded RNG.
    """

    harmonics: list = field(default_factory=lambda: [(1.0, 1e-4), (2.0, 5e-5), (5.8, 2e-5)])
    wheel_speed: float = 1.0
    speed_unit: str = "rev_per_s"
    phases: np.ndarray = None
    seed: int = 0

    def __post_init__(self):
        if self.speed_unit not in ("rev_per_s", "rad_per_s"):
            raise ValueError(f"unknown speed unit {self.speed_unit!r}")
        if not self.wheel_speed > 0:
            raise ValueError("wheel speed must be positive")
        hs = [(float(h), float(a)) for h, a in self.harmonics]
        if not hs or any(h <= 0 or a <= 0 for h, a in hs):
            raise ValueError("harmonic orders and amplitudes must be positive")
        self.harmonics = hs
        if self.phases is None:
            rng = np.random.default_rng(self.seed)
            self.phases = rng.uniform(0.0, 2.0 * np.pi, len(hs))
        else:
            self.phases = np.asarray(self.phases, dtype=float).ravel()
            if self.phases.size != len(hs):
                raise ValueError("one phase per harmonic required")

    @property
    def speed_rev(self) -> float:
        w = self.wheel_speed
        return w / (2.0 * np.pi) if self.speed_unit == "rad_per_s" else w

    def component_arrays(self) -> tuple:
        """(amplitudes, angular frequencies, phases) of the torque harmonics."""
        w = self.speed_rev
        amps = np.array([a * w ** 2 for _, a in self.harmonics])
        oms = np.array([2.0 * np.pi * h * w for h, _ in self.harmonics])
        return amps, oms, self.phases.copy()


def rw_disturbance(model: RwDisturbanceModel, t):
    """Scalar imbalance torque at time(s) t."""
    amps, oms, phs = model.component_arrays()
    t = np.asarray(t, dtype=float)
    vals = amps * np.sin(np.multiply.outer(t, oms) + phs)
    return vals.sum(axis=-1)


def rw_excitation_cells(model: RwDisturbanceModel) -> list:
    """Equivalent single-harmonic sweep cells (amplitude, angular frequency).

    Maps each wheel harmonic onto the torque-amplitude grid axis used by
    the FRF engine, so a wheel speed can be related to sweep cells.
    """
    amps, oms, _ = model.component_arrays()
    return list(zip(amps.tolist(), oms.tolist()))
