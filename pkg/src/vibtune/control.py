"""Controllers and the closed-loop "plant" adapters used by the FRF sweep.

Two controllers appear: a diagonal PD force u = -Th_p q - Th_d q' for the
MDOF family, and the passivity-based tracking law for the satellite,

    tau = H_s qr'' + C_s qr' - (K_r + Th_r) r,   r = q' - qr',

whose closed loop obeys H_s r' + (C_s + K_r + Th_r) r = 0.  A plant object
bundles model + controller + excitation routing and exposes run_cell(),
which the FRF engine calls per grid cell; compiled kernels are used when
available.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .engine import (DivergenceError, IntegratorConfig, SteadyDetector,
                     SteadyStateReport, detect_steady_state, fit_period_steps)
from .mdof import MdofSystem, eval_dynamics, eval_nonlinearity
from .satellite import SatelliteParams, lagrangian_form, mrp_kinematics_jacobian

__all__ = [
    "PdGains",
    "pd_control",
    "TrackingControllerConfig",
    "tracking_error",
    "energy_tracking_control",
    "MdofPlant",
    "SatellitePlant",
]


def _gain_matrix(g, n) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    if g.ndim == 0:
        g = g * np.eye(n)
    elif g.ndim == 1:
        if g.size != n:
            raise ValueError(f"gain vector must have {n} entries")
        g = np.diag(g)
    elif g.shape != (n, n):
        raise ValueError(f"gain matrix must be {n}x{n}")
    if not np.all(np.isfinite(g)):
        raise ValueError("gains must be finite")
    return g


@dataclass
class PdGains:
    """Positive semidefinite proportional/derivative gain pair."""

    theta_p: np.ndarray
    theta_d: np.ndarray

    def __post_init__(self):
        tp = np.atleast_2d(np.asarray(self.theta_p, dtype=float))
        n = tp.shape[0]
        self.theta_p = _gain_matrix(self.theta_p, n)
        self.theta_d = _gain_matrix(self.theta_d, n)
        for name, g in (("theta_p", self.theta_p), ("theta_d", self.theta_d)):
            ev = np.linalg.eigvalsh(0.5 * (g + g.T))
            if ev[0] < -1e-12 * max(1.0, abs(ev[-1])):
                raise ValueError(f"{name} must be positive semidefinite, eigenvalues {ev}")

    @classmethod
    def diagonal(cls, theta_p, theta_d) -> "PdGains":
        tp = np.atleast_1d(np.asarray(theta_p, dtype=float))
        td = np.atleast_1d(np.asarray(theta_d, dtype=float))
        return cls(np.diag(tp), np.diag(td))

    @property
    def n_q(self) -> int:
        return self.theta_p.shape[0]

    def diag_parts(self) -> tuple:
        return np.diag(self.theta_p).copy(), np.diag(self.theta_d).copy()


def pd_control(gains: PdGains, q, qdot) -> np.ndarray:
    """Vibration-suppression force u = -Th_p q - Th_d q'."""
    q = np.atleast_1d(np.asarray(q, dtype=float))
    qdot = np.atleast_1d(np.asarray(qdot, dtype=float))
    return -(gains.theta_p @ q) - (gains.theta_d @ qdot)


@dataclass
class TrackingControllerConfig:
    """Fixed parameters of the energy-based tracking law.

    lambda_r shapes the sliding variable r = e' + lambda_r e; k_r is the
    baseline feedback on r.  Both diagonal positive.
    """

    lambda_r: np.ndarray = field(default_factory=lambda: 0.05 * np.ones(3))
    k_r: np.ndarray = field(default_factory=lambda: 12.0 * np.ones(3))

    def __post_init__(self):
        self.lambda_r = np.atleast_1d(np.asarray(self.lambda_r, dtype=float))
        self.k_r = np.atleast_1d(np.asarray(self.k_r, dtype=float))
        if self.lambda_r.size == 1:
            self.lambda_r = np.repeat(self.lambda_r, 3)
        if self.k_r.size == 1:
            self.k_r = np.repeat(self.k_r, 3)
        if np.any(self.lambda_r <= 0) or np.any(self.k_r <= 0):
            raise ValueError("lambda_r and k_r must be positive")


def tracking_error(q, qdot, q_d, qdot_d=None):
    """(e, edot) against a possibly moving target."""
    q_d = np.asarray(q_d, dtype=float)
    e = np.asarray(q, dtype=float) - q_d
    edot = np.asarray(qdot, dtype=float) - (0.0 if qdot_d is None else np.asarray(qdot_d, dtype=float))
    return e, edot


def energy_tracking_control(params: SatelliteParams, cfg: TrackingControllerConfig,
                            q, qdot, q_d, qdot_d=None, qddot_d=None,
                            theta_r=None) -> np.ndarray:
    """Generalized tracking force tau_s in MRP coordinates.

    tau_s = H_s qr'' + C_s qr' - (K_r + Th_r) r with the reference
    qr' = q_d' - lambda_r e.  theta_r = None (or zeros) gives the plain
    energy controller; the body torque is J^T tau_s.
    """
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    e, edot = tracking_error(q, qdot, q_d, qdot_d)
    qdot_d = np.zeros(3) if qdot_d is None else np.asarray(qdot_d, dtype=float)
    qddot_d = np.zeros(3) if qddot_d is None else np.asarray(qddot_d, dtype=float)
    qr_dot = qdot_d - cfg.lambda_r * e
    qr_ddot = qddot_d - cfg.lambda_r * edot
    r = qdot - qr_dot
    hs, cs = lagrangian_form(params, q, qdot)
    tau = hs @ qr_ddot + cs @ qr_dot - cfg.k_r * r
    if theta_r is not None:
        tau = tau - _gain_matrix(theta_r, 3) @ r
    return tau


# ---------------------------------------------------------------------------
# Plant adapters for the sweep engine
# ---------------------------------------------------------------------------


def _drive_kernel(kernel_step, cfg: IntegratorConfig, period: float):
    """Shared chunked driver: feed kernel peak rows into a SteadyDetector.

    kernel_step(n_periods) -> (peaks, t_final, periods_done) advancing the
    kernel's internal state; returns a SteadyStateReport.
    """
    det = SteadyDetector(cfg)
    last_rows = []
    measured = []
    converged = False
    while det.k < cfg.max_periods and not converged:
        chunk = min(32, cfg.max_periods - det.k)
        peaks, t_end, done = kernel_step(chunk)
        for row_idx in range(done):
            row = peaks[row_idx]
            last_rows.append(row)
            if len(last_rows) > cfg.measure_periods:
                last_rows.pop(0)
            if det.push(row):
                # rows already integrated past convergence count as measurement
                measured = [peaks[j] for j in range(row_idx + 1, done)]
                converged = True
                break
        if done < chunk and not converged:
            raise DivergenceError(t_end)
    if not converged:
        peak = np.max(np.vstack(last_rows), axis=0)
        t_end_total = det.k * period
        return SteadyStateReport(False, det.k, peak,
                                 (t_end_total - len(last_rows) * period, t_end_total))
    need = cfg.measure_periods - len(measured)
    if need > 0:
        peaks, t_end, done = kernel_step(need)
        if done < need:
            raise DivergenceError(t_end)
        measured.extend(peaks[j] for j in range(done))
    measured = measured[: cfg.measure_periods]
    peak = np.max(np.vstack(measured), axis=0)
    t_conv = det.converged_at * period
    return SteadyStateReport(True, det.converged_at, peak,
                             (t_conv, t_conv + cfg.measure_periods * period))


class MdofPlant:
    """MDOF system under PD control, excited by lam * a sin(omega t)."""

    def __init__(self, system: MdofSystem, gains: PdGains = None):
        self.system = system
        n = system.n_q
        self.gains = gains or PdGains.diagonal(np.zeros(n), np.zeros(n))
        if self.gains.n_q != n:
            raise ValueError("gain dimension does not match system")
        if n == 1:
            self.channel_labels = ["x1", "x2"]
        else:
            self.channel_labels = [f"x1_{i}" for i in range(n)] + [f"x2_{i}" for i in range(n)]
        # position channels first, then velocities; used by the tuner
        self.position_channels = list(range(n))
        self.velocity_channels = list(range(n, 2 * n))
        max_terms = max((len(t) for t in system.nonlin), default=0)
        self.nl_exp = np.zeros((n, max(max_terms, 1)), dtype=np.int64)
        self.nl_coef = np.zeros((n, max(max_terms, 1)))
        for i, terms in enumerate(system.nonlin):
            for m, (p, b) in enumerate(terms):
                self.nl_exp[i, m] = 2 * p + 1
                self.nl_coef[i, m] = b

    def with_gains(self, gains: PdGains) -> "MdofPlant":
        return MdofPlant(self.system, gains)

    def default_x0(self) -> np.ndarray:
        return np.zeros(2 * self.system.n_q)

    def resonance_hint(self) -> float:
        """Lowest undamped natural frequency; anchors the probe cell."""
        return float(self.system.natural_frequencies()[0])

    def probe_setup(self, a: float, omega: float):
        """(dynamics, period, initial states) for the multi-IC probe.

        Initial states fan the positions out to -3, 3 and 5 on every DOF
        with zero velocity.
        """
        n = self.system.n_q
        ics = [np.concatenate([p * np.ones(n), np.zeros(n)]) for p in (-3.0, 3.0, 5.0)]
        return self._closure(a, omega), 2.0 * np.pi / omega, ics

    def _closure(self, a, omega):
        sys_, g = self.system, self.gains

        def rhs(t, x):
            n = sys_.n_q
            u = pd_control(g, x[:n], x[n:])
            return eval_dynamics(sys_, x, a * np.sin(omega * t), u)

        return rhs

    def run_cell(self, a: float, omega: float, x0=None,
                 config: IntegratorConfig = None) -> SteadyStateReport:
        cfg = config or IntegratorConfig()
        period = 2.0 * np.pi / omega
        x0 = self.default_x0() if x0 is None else np.asarray(x0, dtype=float)
        if not kernels.NUMBA_OK:
            return detect_steady_state(self._closure(a, omega), x0, period, cfg)
        n_steps, h = fit_period_steps(period, cfg.step_h)
        sys_ = self.system
        kp = sys_.stiffness + sys_.gam @ self.gains.theta_p
        cd = sys_.damping + sys_.gam @ self.gains.theta_d
        state = {"x": x0.copy(), "t": 0.0}

        def kernel_step(n_periods):
            peaks, x, t, done = kernels.mdof_period_peaks(
                state["x"], state["t"], sys_.minv, cd, kp, self.nl_exp,
                self.nl_coef, sys_.lam, a, omega, h, n_steps, n_periods)
            state["x"], state["t"] = x, t
            return peaks, t, done

        rep = _drive_kernel(kernel_step, cfg, period)
        rep.final_state = state["x"]
        return rep


class SatellitePlant:
    """Tracking-controlled satellite excited by a torque a sin(omega t) * influence.

    Channels are the per-axis attitude errors e and their rates.  Requires
    diagonal inertia (the compiled path assumes it); the generic fallback
    handles the same dynamics through closures.
    """

    def __init__(self, params: SatelliteParams, tracking: TrackingControllerConfig,
                 gains: PdGains = None, q_d=(1.0, 0.5, 0.0), influence=(1.0, 1.0, 1.0)):
        self.params = params
        self.tracking = tracking
        self.gains = gains or PdGains.diagonal(np.zeros(3), np.zeros(3))
        self.q_d = np.asarray(q_d, dtype=float).ravel()
        self.influence = np.asarray(influence, dtype=float).ravel()
        if self.q_d.shape != (3,) or self.influence.shape != (3,):
            raise ValueError("q_d and influence must be 3-vectors")
        self.channel_labels = [f"e{i+1}" for i in range(3)] + [f"edot{i+1}" for i in range(3)]
        self.position_channels = [0, 1, 2]
        self.velocity_channels = [3, 4, 5]

    def with_gains(self, gains: PdGains) -> "SatellitePlant":
        return SatellitePlant(self.params, self.tracking, gains, self.q_d, self.influence)

    def default_x0(self) -> np.ndarray:
        return np.concatenate([self.q_d, np.zeros(3)])

    def resonance_hint(self) -> float:
        """Median per-axis natural frequency of the closed error loop.

        The error dynamics behave like H_s e'' + (...) e' + (K_r lambda_r
        + Th_p) e = w near the target, so sqrt of that stiffness over the
        configuration-space inertia diagonal estimates the resonances.
        """
        hs, _ = lagrangian_form(self.params, self.q_d, np.zeros(3))
        thp, _ = self.gains.diag_parts()
        stiff = self.tracking.k_r * self.tracking.lambda_r + thp
        return float(np.median(np.sqrt(stiff / np.diag(hs))))

    def probe_setup(self, a: float, omega: float):
        """(dynamics, period, initial states) for the multi-IC probe.

        Attitudes start offset from the target along (1,1,1)/sqrt(3) by
        -0.3, 0.3 and 0.5, at rest.
        """
        arr = np.array([float(a)]), np.array([float(omega)]), np.zeros(1)
        direction = np.ones(3) / np.sqrt(3.0)
        ics = [np.concatenate([self.q_d + d * direction, np.zeros(3)])
               for d in (-0.3, 0.3, 0.5)]
        return self._closure(*arr), 2.0 * np.pi / omega, ics

    def _kernel_args(self):
        if not self.params.is_diagonal:
            raise ValueError("satellite plant requires diagonal inertia")
        thp, thd = self.gains.diag_parts()
        return (np.diag(self.params.inertia).copy(), self.tracking.k_r,
                self.tracking.lambda_r, thp, thd, self.q_d, self.influence)

    def _closure(self, amps, oms, phs):
        params, cfg, g = self.params, self.tracking, self.gains
        q_d, infl = self.q_d, self.influence

        def rhs(t, y):
            q, w = y[:3], y[3:]
            js = mrp_kinematics_jacobian(q)
            qdot = js @ w
            e, edot = tracking_error(q, qdot, q_d)
            tau_s = energy_tracking_control(params, cfg, q, qdot, q_d)
            u_s = -(g.theta_p @ e) - (g.theta_d @ edot)
            dist = infl * np.sum(amps * np.sin(oms * t + phs))
            torque = js.T @ (tau_s + u_s) + dist
            wdot = params.inertia_inv @ (torque - np.cross(w, params.inertia @ w))
            return np.concatenate([qdot, wdot])

        return rhs

    def _error_channels(self):
        q_d = self.q_d

        def channels(y):
            q, w = y[:3], y[3:]
            qdot = mrp_kinematics_jacobian(q) @ w
            return np.concatenate([q - q_d, qdot])

        return channels

    def run_cell(self, a: float, omega: float, x0=None,
                 config: IntegratorConfig = None) -> SteadyStateReport:
        cfg = config or IntegratorConfig()
        period = 2.0 * np.pi / omega
        x0 = self.default_x0() if x0 is None else np.asarray(x0, dtype=float)
        amps = np.array([float(a)])
        oms = np.array([float(omega)])
        phs = np.zeros(1)
        if not kernels.NUMBA_OK:
            return detect_steady_state(self._closure(amps, oms, phs), x0, period,
                                       cfg, channels=self._error_channels())
        n_steps, h = fit_period_steps(period, cfg.step_h)
        hdiag, kr, lr, thp, thd, q_d, infl = self._kernel_args()
        state = {"y": x0.copy(), "t": 0.0}

        def kernel_step(n_periods):
            peaks, y, t, done = kernels.satellite_period_peaks(
                state["y"], state["t"], hdiag, kr, lr, thp, thd, q_d, infl,
                amps, oms, phs, h, n_steps, n_periods)
            state["y"], state["t"] = y, t
            return peaks, t, done

        rep = _drive_kernel(kernel_step, cfg, period)
        rep.final_state = state["y"]
        return rep

    def error_trace(self, amps, oms, phs, horizon: float, step_h: float, x0=None):
        """(times, e/edot trace) under a multi-harmonic disturbance torque."""
        x0 = self.default_x0() if x0 is None else np.asarray(x0, dtype=float)
        amps = np.asarray(amps, dtype=float)
        oms = np.asarray(oms, dtype=float)
        phs = np.asarray(phs, dtype=float)
        n_total = int(np.ceil(horizon / step_h - 1e-12))
        times = step_h * np.arange(n_total + 1)
        if kernels.NUMBA_OK:
            hdiag, kr, lr, thp, thd, q_d, infl = self._kernel_args()
            trace, y, t, done = kernels.satellite_error_trace(
                x0, 0.0, hdiag, kr, lr, thp, thd, q_d, infl,
                amps, oms, phs, step_h, n_total)
            if done < n_total:
                raise DivergenceError(t)
            return times, trace
        rhs = self._closure(amps, oms, phs)
        chan = self._error_channels()
        from .engine import rk4_step
        y = x0.copy()
        trace = np.empty((n_total + 1, 6))
        trace[0] = chan(y)
        t = 0.0
        for i in range(n_total):
            y = rk4_step(rhs, t, y, step_h)
            t += step_h
            if not np.all(np.isfinite(y)):
                raise DivergenceError(t)
            trace[i + 1] = chan(y)
        return times, trace
