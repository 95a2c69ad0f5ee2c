"""Integrator and steady-state detector against analytic solutions."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from vibtune import (DivergenceError, IntegratorConfig, MdofPlant, MdofSystem,
                     detect_steady_state, duffing_preset, integrate,
                     multi_ic_convergence, rk4_step)
from vibtune.engine import fit_period_steps


def test_rk4_exponential_decay():
    """x' = -x from 1 must land on e^-t within 1e-9."""
    traj = integrate(lambda t, x: -x, [1.0], (0.0, 1.0), IntegratorConfig(step_h=0.01))
    assert abs(traj.states[-1, 0] - np.exp(-1.0)) < 1e-9
    # every intermediate sample too, not just the endpoint
    assert np.max(np.abs(traj.states[:, 0] - np.exp(-traj.times))) < 1e-9


def test_rk4_oscillator_energy():
    om = 2.0

    def rhs(t, x):
        return np.array([x[1], -om * om * x[0]])

    T = 2.0 * np.pi / om
    traj = integrate(rhs, [1.0, 0.0], (0.0, 100 * T), IntegratorConfig(step_h=T / 400))
    energy = 0.5 * traj.states[:, 1] ** 2 + 0.5 * om ** 2 * traj.states[:, 0] ** 2
    assert np.max(np.abs(energy - energy[0])) / energy[0] < 1e-8


def test_rk4_single_step_order():
    # one RK4 step of x' = x matches the Taylor series through h^4
    h = 0.1
    x1 = rk4_step(lambda t, x: x, 0.0, np.array([1.0]), h)
    series = sum(h ** k / math.factorial(k) for k in range(5))
    assert_allclose(x1[0], series, rtol=0, atol=1e-15)


def test_integrate_constant_and_grid():
    traj = integrate(lambda t, x: np.zeros(1), [4.0], (0.0, 2.0),
                     IntegratorConfig(step_h=0.5))
    assert_allclose(traj.states[:, 0], 4.0)
    assert_allclose(traj.times, [0.0, 0.5, 1.0, 1.5, 2.0])


def test_integrate_raises_on_blowup():
    # x' = x^2 escapes to infinity in finite time from x0 = 1
    with pytest.raises(DivergenceError):
        integrate(lambda t, x: x * x, [1.0], (0.0, 5.0), IntegratorConfig(step_h=0.01))


def test_integrate_input_logging():
    traj = integrate(lambda t, x: -x, [1.0], (0.0, 1.0), IntegratorConfig(step_h=0.1),
                     w_log=lambda t: 2.0 * t, u_log=lambda t, x: -x)
    assert traj.w.shape == (len(traj.times), 1)
    assert_allclose(traj.w[:, 0], 2.0 * traj.times)
    assert_allclose(traj.u[:, 0], -traj.states[:, 0])


def test_fit_period_steps_properties():
    for period in (0.1, 1.0, 2.0 * np.pi / 6.0, 157.0):
        n, h = fit_period_steps(period, 0.001)
        assert n * h == pytest.approx(period, rel=1e-12)
        assert h <= period / 20
        assert h <= 0.001 + 1e-15
    with pytest.raises(ValueError):
        fit_period_steps(0.0, 0.001)


def test_steady_state_linear_amplitude():
    """Driven linear oscillator settles to the analytic magnitude."""
    m, c, k = 1.0, 0.4, 36.0
    plant = MdofPlant(MdofSystem([[m]], [[c]], [[k]]))
    for a, om in ((1.0, 6.0), (2.0, 3.0), (0.5, 8.0)):
        rep = detect_steady_state(plant._closure(a, om), np.zeros(2),
                                  2.0 * np.pi / om, IntegratorConfig())
        assert rep.converged
        mag = a / np.sqrt((k - m * om ** 2) ** 2 + (c * om) ** 2)
        assert rep.peak_per_channel[0] == pytest.approx(mag, rel=0.02)


def test_steady_state_zero_input():
    plant = MdofPlant(duffing_preset())
    rep = detect_steady_state(plant._closure(0.0, 6.0), np.zeros(2),
                              2.0 * np.pi / 6.0, IntegratorConfig())
    assert rep.converged
    assert_allclose(rep.peak_per_channel, 0.0, atol=1e-15)


def test_steady_state_determinism():
    plant = MdofPlant(duffing_preset())
    reps = [detect_steady_state(plant._closure(2.0, 6.0), np.zeros(2),
                                2.0 * np.pi / 6.0, IntegratorConfig())
            for _ in range(2)]
    assert reps[0].peak_per_channel.tobytes() == reps[1].peak_per_channel.tobytes()
    assert reps[0].periods_used == reps[1].periods_used


def test_multi_ic_identical_states():
    plant = MdofPlant(duffing_preset())
    rep = multi_ic_convergence(plant._closure(2.0, 6.0), 2.0 * np.pi / 6.0,
                               [np.array([1.0, 0.0]), np.array([1.0, 0.0])], 10.0)
    assert rep.terminal_max_distance == 0.0
    assert np.isnan(rep.decay_rate)


def test_multi_ic_linear_decay_rate():
    """Unforced linear oscillator: envelope decays like c/(2m) = 0.2."""
    plant = MdofPlant(duffing_preset("linear"))
    ics = [np.array([-3.0, 0.0]), np.array([3.0, 0.0]), np.array([5.0, 0.0])]
    rep = multi_ic_convergence(plant._closure(0.0, 6.0), 2.0 * np.pi / 6.0,
                               ics, 40.0, IntegratorConfig())
    assert rep.decay_rate == pytest.approx(0.2, rel=0.15)
    assert rep.terminal_max_distance < rep.distances[0].max()


def test_multi_ic_blowup_raises():
    with pytest.raises(DivergenceError):
        multi_ic_convergence(lambda t, x: x * x, 1.0,
                             [np.array([1.0]), np.array([2.0])], 10.0,
                             IntegratorConfig(step_h=0.01))
