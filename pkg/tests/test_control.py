"""PD law, tracking controller, and the plant adapters."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from vibtune import (IntegratorConfig, MdofPlant, PdGains, SatelliteParams,
                     SatellitePlant, TrackingControllerConfig, duffing_preset,
                     energy_tracking_control, lagrangian_form, pd_control,
                     tracking_error)


def test_pd_gains_validation():
    with pytest.raises(ValueError):
        PdGains(np.array([[1.0, 0.0], [0.0, -2.0]]), np.eye(2))
    with pytest.raises(ValueError):
        PdGains.diagonal([1.0], [np.inf])
    g = PdGains.diagonal([2.0, 3.0], [0.5, 0.1])
    tp, td = g.diag_parts()
    assert_allclose(tp, [2.0, 3.0])
    assert_allclose(td, [0.5, 0.1])
    assert g.n_q == 2


def test_pd_control_sign_and_value():
    g = PdGains.diagonal([2.0], [0.5])
    assert pd_control(g, [1.0], [2.0])[0] == pytest.approx(-3.0)
    assert pd_control(g, [0.0], [0.0])[0] == 0.0
    # resists the motion: u opposes both position and velocity
    assert pd_control(g, [1.0], [0.0])[0] < 0
    assert pd_control(g, [-1.0], [0.0])[0] > 0


def test_tracking_error():
    e, edot = tracking_error([1.0, 0.5, 0.0], [0.1, 0.0, 0.0], [1.0, 0.0, 0.0])
    assert_allclose(e, [0.0, 0.5, 0.0])
    assert_allclose(edot, [0.1, 0.0, 0.0])


def test_tracking_config_broadcast():
    cfg = TrackingControllerConfig(0.1, 5.0)
    assert_allclose(cfg.lambda_r, [0.1, 0.1, 0.1])
    assert_allclose(cfg.k_r, [5.0, 5.0, 5.0])
    with pytest.raises(ValueError):
        TrackingControllerConfig(-0.1, 5.0)


def test_energy_controller_zero_at_target():
    params = SatelliteParams()
    cfg = TrackingControllerConfig()
    q_d = np.array([0.4, 0.2, 0.0])
    tau = energy_tracking_control(params, cfg, q_d, np.zeros(3), q_d)
    assert_allclose(tau, 0.0, atol=1e-12)


def test_energy_controller_drives_error_down():
    params = SatelliteParams()
    cfg = TrackingControllerConfig(0.2, 12.0)
    q_d = np.array([0.4, 0.2, 0.0])

    def rhs(t, y):
        q, qdot = y[:3], y[3:]
        hs, cs = lagrangian_form(params, q, qdot)
        tau = energy_tracking_control(params, cfg, q, qdot, q_d)
        return np.concatenate([qdot, np.linalg.solve(hs, tau - cs @ qdot)])

    from vibtune.engine import integrate

    traj = integrate(rhs, np.zeros(6), (0.0, 80.0), IntegratorConfig(step_h=0.01))
    err = np.linalg.norm(traj.states[:, :3] - q_d, axis=1)
    r = traj.states[:, 3:] + cfg.lambda_r * (traj.states[:, :3] - q_d)
    rnorm = np.linalg.norm(r, axis=1)
    # r decays at roughly k_r / lambda_max(H_s) ~ 0.04/s and e is slaved to it
    assert err[-1] < 1e-2 * err[0]
    assert rnorm[-1] < 2e-2 * rnorm[0]


def test_theta_r_adds_feedback():
    params = SatelliteParams()
    cfg = TrackingControllerConfig()
    q = np.array([0.3, 0.0, 0.0])
    qdot = np.array([0.1, -0.2, 0.0])
    q_d = np.zeros(3)
    base = energy_tracking_control(params, cfg, q, qdot, q_d)
    with_r = energy_tracking_control(params, cfg, q, qdot, q_d, theta_r=[2.0, 2.0, 2.0])
    e, edot = tracking_error(q, qdot, q_d)
    r = edot + cfg.lambda_r * e
    assert_allclose(with_r, base - 2.0 * r, atol=1e-12)


def test_mdof_plant_channels_and_gains():
    plant = MdofPlant(duffing_preset())
    assert plant.channel_labels == ["x1", "x2"]
    assert plant.position_channels == [0]
    assert plant.velocity_channels == [1]
    g2 = plant.with_gains(PdGains.diagonal([1.0], [2.0]))
    assert g2.gains.theta_d[0, 0] == 2.0
    assert plant.gains.theta_d[0, 0] == 0.0  # original untouched
    with pytest.raises(ValueError):
        MdofPlant(duffing_preset(), PdGains.diagonal([1.0, 1.0], [1.0, 1.0]))


def test_mdof_plant_probe_setup():
    plant = MdofPlant(duffing_preset())
    dynamics, period, ics = plant.probe_setup(2.0, 6.0)
    assert period == pytest.approx(2.0 * np.pi / 6.0)
    assert [ic[0] for ic in ics] == [-3.0, 3.0, 5.0]
    assert all(ic[1] == 0.0 for ic in ics)
    # dynamics is the controlled closure: evaluates without error
    assert dynamics(0.0, np.zeros(2)).shape == (2,)


def test_satellite_plant_channels_and_trace():
    plant = SatellitePlant(SatelliteParams(), TrackingControllerConfig(),
                           q_d=[1.0, 0.5, 0.0], influence=[0.075, 0.09, 0.0])
    assert plant.channel_labels == ["e1", "e2", "e3", "edot1", "edot2", "edot3"]
    times, trace = plant.error_trace(np.array([1e-6]), np.array([0.1]),
                                     np.array([0.0]), 20.0, 0.05)
    assert trace.shape == (len(times), 6)
    # starting on target: the error stays small under a tiny torque
    assert np.max(np.abs(trace)) < 1e-3


def test_satellite_resonance_hint_tracks_gains():
    base = SatellitePlant(SatelliteParams(), TrackingControllerConfig(),
                          q_d=[1.0, 0.5, 0.0], influence=[0.075, 0.09, 0.0])
    stiff = base.with_gains(PdGains.diagonal([5.0, 5.0, 5.0], [0.0, 0.0, 0.0]))
    assert stiff.resonance_hint() > base.resonance_hint()
