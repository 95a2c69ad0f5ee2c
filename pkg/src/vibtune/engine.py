"""Fixed-step RK4 integration and steady-state detection.

Steady state is declared from the per-period peak trace: once the relative
change of every output channel's period peak stays below ``ss_rel_tol`` for
three consecutive periods (after a mandatory transient discard), the
response is measured over ``measure_periods`` further periods.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "IntegratorConfig",
    "Trajectory",
    "SteadyStateReport",
    "MultiIcReport",
    "DivergenceError",
    "rk4_step",
    "integrate",
    "detect_steady_state",
    "multi_ic_convergence",
    "SteadyDetector",
    "fit_period_steps",
]

# Consecutive quiet periods required before the response counts as steady.
STREAK_REQUIRED = 3


class DivergenceError(RuntimeError):
    """Raised when an integration produces non-finite state."""

    def __init__(self, time: float, context: str = ""):
        self.time = float(time)
        msg = f"state became non-finite at t = {self.time:.6g}"
        if context:
            msg += f" ({context})"
        super().__init__(msg)


@dataclass
class IntegratorConfig:
    """Settings for RK4 propagation and steady-state detection.

    step_h is an upper bound on the step; inside period-based detection the
    step is refitted so an integer number of steps spans one excitation
    period, never exceeding T/20.
    """

    step_h: float = 0.01
    max_periods: int = 500
    ss_rel_tol: float = 1e-3
    measure_periods: int = 3
    min_transient_periods: int = 10
    eps_floor: float = 1e-12

    def __post_init__(self):
        if not self.step_h > 0:
            raise ValueError("step_h must be positive")
        if self.max_periods < 1 or self.measure_periods < 1:
            raise ValueError("period counts must be >= 1")
        if not (0 < self.ss_rel_tol < 1):
            raise ValueError("ss_rel_tol must lie in (0, 1)")


@dataclass
class Trajectory:
    """Uniformly sampled solution, with the applied inputs alongside."""

    times: np.ndarray
    states: np.ndarray
    w: np.ndarray = None
    u: np.ndarray = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        n = self.times.size
        if self.states.shape[0] != n:
            raise ValueError("times and states length mismatch")
        if self.w is None:
            self.w = np.zeros((n, 0))
        if self.u is None:
            self.u = np.zeros((n, 0))
        self.w = np.atleast_1d(np.asarray(self.w, dtype=float))
        self.u = np.atleast_1d(np.asarray(self.u, dtype=float))
        if self.w.ndim == 1:
            self.w = self.w[:, None]
        if self.u.ndim == 1:
            self.u = self.u[:, None]
        for name, arr in (("w", self.w), ("u", self.u)):
            if arr.shape[0] != n:
                raise ValueError(f"{name} length mismatch with times")

    @property
    def step_h(self) -> float:
        return float(self.times[1] - self.times[0]) if self.times.size > 1 else 0.0


@dataclass
class SteadyStateReport:
    converged: bool
    periods_used: int
    peak_per_channel: np.ndarray
    window: tuple
    final_state: np.ndarray = None


@dataclass
class MultiIcReport:
    window_times: np.ndarray          # right edge of each sampling window
    distances: np.ndarray             # (n_windows, n_pairs) sup-norm distances
    terminal_max_distance: float
    decay_rate: float                 # from a log-linear fit; nan if too few samples


def rk4_step(f, t, x, h):
    """One classic Runge-Kutta 4 step for x' = f(t, x)."""
    k1 = f(t, x)
    k2 = f(t + 0.5 * h, x + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, x + 0.5 * h * k2)
    k4 = f(t + h, x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(dynamics, x0, t_span, config: IntegratorConfig = None,
              w_log=None, u_log=None) -> Trajectory:
    """Propagate x' = dynamics(t, x) over t_span with fixed-step RK4.

    The number of steps is ceil((t1-t0)/step_h), so the final sample lands
    within one step of the requested end time.  w_log / u_log, when given,
    are evaluated at the sample times (w_log(t), u_log(t, x)) and recorded
    on the returned Trajectory.
    """
    cfg = config or IntegratorConfig()
    x = np.asarray(x0, dtype=float).copy()
    t0, t1 = float(t_span[0]), float(t_span[1])
    if t1 <= t0:
        raise ValueError("t_span must be increasing")
    h = cfg.step_h
    n_steps = int(np.ceil((t1 - t0) / h - 1e-12))
    times = t0 + h * np.arange(n_steps + 1)
    states = np.empty((n_steps + 1, x.size))
    states[0] = x
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n_steps):
            x = rk4_step(dynamics, times[i], x, h)
            if not np.all(np.isfinite(x)):
                raise DivergenceError(times[i] + h)
            states[i + 1] = x
    w = u = None
    if w_log is not None:
        w = np.array([np.atleast_1d(w_log(t)) for t in times])
    if u_log is not None:
        u = np.array([np.atleast_1d(u_log(t, s)) for t, s in zip(times, states)])
    return Trajectory(times, states, w, u)


def fit_period_steps(period: float, step_h: float) -> tuple:
    """Steps per period and the refitted step: integer count, h <= T/20."""
    if not period > 0:
        raise ValueError("period must be positive")
    n = max(20, int(np.ceil(period / step_h - 1e-9)))
    return n, period / n


class SteadyDetector:
    """Streaming convergence decision over a per-period peak trace.

    Feed one row of per-channel period peaks at a time; ``push`` returns
    True once the relative peak change stayed below tol for
    ``STREAK_REQUIRED`` consecutive periods beyond the transient discard.
    """

    def __init__(self, config: IntegratorConfig):
        self.cfg = config
        self.k = 0
        self.prev = None
        self.streak = 0
        self.converged_at = None

    def push(self, peaks_row) -> bool:
        peaks_row = np.asarray(peaks_row, dtype=float)
        self.k += 1
        if self.prev is not None:
            denom = np.maximum(peaks_row, self.cfg.eps_floor)
            rel = np.max(np.abs(peaks_row - self.prev) / denom)
            if rel < self.cfg.ss_rel_tol and self.k > self.cfg.min_transient_periods:
                self.streak += 1
            else:
                self.streak = 0
        self.prev = peaks_row
        if self.streak >= STREAK_REQUIRED and self.converged_at is None:
            self.converged_at = self.k
        return self.converged_at is not None


def _one_period_peaks(dynamics, x, t, h, n_steps, channels):
    """Integrate one excitation period, tracking per-channel |output| peaks."""
    pk = np.abs(channels(x)) * 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(n_steps):
            x = rk4_step(dynamics, t, x, h)
            t += h
            np.maximum(pk, np.abs(channels(x)), out=pk)
    if not np.all(np.isfinite(x)):
        raise DivergenceError(t)
    return pk, x, t


def detect_steady_state(dynamics, x0, period, config: IntegratorConfig = None,
                        channels=None) -> SteadyStateReport:
    """Drive the system to steady state and measure per-channel peaks.

    dynamics must embed the periodic excitation; ``period`` is its period.
    channels maps a state vector to the outputs whose peaks are tracked
    (default: the full state).  The measured peak is the channel-wise max
    over ``measure_periods`` periods following detection; if the peak trace
    never settles the report carries converged=False and the peaks of the
    last periods simulated.
    """
    cfg = config or IntegratorConfig()
    if channels is None:
        channels = lambda x: x
    n_steps, h = fit_period_steps(period, cfg.step_h)
    x = np.asarray(x0, dtype=float).copy()
    t = 0.0
    det = SteadyDetector(cfg)
    last_rows = []
    while det.k < cfg.max_periods:
        pk, x, t = _one_period_peaks(dynamics, x, t, h, n_steps, channels)
        last_rows.append(pk)
        if len(last_rows) > cfg.measure_periods:
            last_rows.pop(0)
        if det.push(pk):
            break
    converged = det.converged_at is not None
    periods_used = det.converged_at if converged else det.k
    if converged:
        t_start = t
        peak = None
        for _ in range(cfg.measure_periods):
            pk, x, t = _one_period_peaks(dynamics, x, t, h, n_steps, channels)
            peak = pk if peak is None else np.maximum(peak, pk)
        window = (t_start, t)
    else:
        peak = np.max(np.vstack(last_rows), axis=0)
        window = (t - len(last_rows) * period, t)
    return SteadyStateReport(converged, periods_used, peak, window, final_state=x)


def _pair_indices(n):
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


def multi_ic_convergence(dynamics, input_period, initial_states, horizon,
                         config: IntegratorConfig = None) -> MultiIcReport:
    """Propagate several initial conditions and track pairwise distances.

    Distances are the sup-norm over states, maximized within consecutive
    windows of one excitation period (or 1 s when input_period is None).
    The decay rate comes from a least-squares line through the log of the
    largest pairwise distance, ignoring samples below 1e-9.
    """
    cfg = config or IntegratorConfig()
    T = float(input_period) if input_period else 1.0
    n_steps, h = fit_period_steps(T, cfg.step_h)
    n_windows = max(1, int(np.round(horizon / T)))
    xs = [np.asarray(x0, dtype=float).copy() for x0 in initial_states]
    pairs = _pair_indices(len(xs))
    distances = np.empty((n_windows, len(pairs)))
    window_times = np.empty(n_windows)
    t = 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        for wdx in range(n_windows):
            dmax = np.zeros(len(pairs))
            for _ in range(n_steps):
                for i in range(len(xs)):
                    xs[i] = rk4_step(dynamics, t, xs[i], h)
                t += h
                for pdx, (i, j) in enumerate(pairs):
                    d = np.max(np.abs(xs[i] - xs[j]))
                    if d > dmax[pdx]:
                        dmax[pdx] = d
            for x in xs:
                if not np.all(np.isfinite(x)):
                    raise DivergenceError(t)
            distances[wdx] = dmax
            window_times[wdx] = t
    worst = distances.max(axis=1)
    keep = worst > 1e-9
    if np.count_nonzero(keep) >= 2:
        slope = np.polyfit(window_times[keep], np.log(worst[keep]), 1)[0]
        rate = -slope
    else:
        rate = float("nan")
    return MultiIcReport(window_times, distances, float(worst[-1]), rate)
