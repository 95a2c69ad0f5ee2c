"""FRF sweep: analytic linear oracle, path equivalence, failure handling."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from vibtune import (ExcitationGrid, IntegratorConfig, MdofPlant, MdofSystem,
                     PdGains, SweepFailure, amplification_gain, default_grid,
                     detect_steady_state, duffing_preset, frf_sweep,
                     frobenius_norm)
from vibtune.engine import fit_period_steps


def analytic_gain(om, m=1.0, c=0.4, k=36.0):
    return 1.0 / np.sqrt((k - m * om ** 2) ** 2 + (c * om) ** 2)


def small_grid():
    return ExcitationGrid([0.5, 2.0, 6.0], [3.0, 5.0, 6.0, 7.0, 9.0])


def test_grid_validation():
    with pytest.raises(ValueError):
        ExcitationGrid([], [3.0])
    with pytest.raises(ValueError):
        ExcitationGrid([1.0], [3.0, -1.0])
    with pytest.raises(ValueError):
        ExcitationGrid([0.0], [3.0])
    g = ExcitationGrid([1.0, 2.0], [3.0, 4.0, 5.0])
    assert g.shape == (2, 3)


def test_default_grid_ranges():
    g = default_grid()
    assert g.shape == (12, 25)
    assert g.amplitudes[0] == 0.5 and g.amplitudes[-1] == 6.0
    assert g.frequencies[0] == 3.0 and g.frequencies[-1] == 9.0
    assert_allclose(np.diff(g.frequencies), 0.25)


def test_amplification_gain_scaling():
    plant = MdofPlant(duffing_preset("linear"))
    rep = plant.run_cell(2.0, 6.0)
    g = amplification_gain(rep, 2.0)
    assert_allclose(g, rep.peak_per_channel / 2.0)


def test_linear_frf_matches_analytic():
    plant = MdofPlant(duffing_preset("linear"))
    mats = frf_sweep(plant, small_grid())
    gx = mats[0]
    for j, om in enumerate(gx.frequencies):
        assert_allclose(gx.gains[:, j], analytic_gain(om), rtol=0.02)
    # velocity channel gain = omega * position gain for a sine steady state
    gv = mats[1]
    for j, om in enumerate(gv.frequencies):
        assert_allclose(gv.gains[:, j], om * analytic_gain(om), rtol=0.02)


def test_linear_frf_amplitude_invariant():
    plant = MdofPlant(duffing_preset("linear"))
    vals = frf_sweep(plant, small_grid())[0].gains
    spread = vals.max(axis=0) - vals.min(axis=0)
    assert np.all(spread / vals.mean(axis=0) < 0.005)


def test_kernel_and_generic_paths_agree():
    plant = MdofPlant(duffing_preset(), PdGains.diagonal([1.0], [0.5]))
    cfg = IntegratorConfig()
    for a, om in ((2.0, 5.0), (6.0, 6.0)):
        kernel = plant.run_cell(a, om, config=cfg)
        generic = detect_steady_state(plant._closure(a, om), plant.default_x0(),
                                      2.0 * np.pi / om, cfg)
        assert kernel.converged == generic.converged
        assert kernel.periods_used == generic.periods_used
        assert_allclose(kernel.peak_per_channel, generic.peak_per_channel,
                        rtol=0, atol=1e-12)


def test_serial_parallel_identical():
    plant = MdofPlant(duffing_preset())
    a = frf_sweep(plant, small_grid(), jobs=1)
    b = frf_sweep(plant, small_grid(), jobs=4)
    for ma, mb in zip(a, b):
        assert ma.gains.tobytes() == mb.gains.tobytes()


def test_warm_start_matches_cold_on_linear():
    # unique steady state -> the warm-started sweep must land on the same FRF
    plant = MdofPlant(duffing_preset("linear"))
    warm = frf_sweep(plant, small_grid(), warm_start=True)[0].gains
    cold = frf_sweep(plant, small_grid(), warm_start=False)[0].gains
    # agreement is limited by the steady-state detection tolerance
    assert_allclose(warm, cold, rtol=3 * IntegratorConfig().ss_rel_tol)


def test_hardening_shifts_resonance():
    plant = MdofPlant(duffing_preset("nonlinear-100"))
    grid = ExcitationGrid([0.5, 6.0], np.arange(5.0, 9.01, 0.25))
    vals = frf_sweep(plant, grid)[0].gains
    peak_low = grid.frequencies[np.argmax(vals[0])]
    peak_high = grid.frequencies[np.argmax(vals[1])]
    assert peak_high > peak_low


def test_sweep_failure_abort_lists_cells():
    plant = MdofPlant(duffing_preset())
    cfg = IntegratorConfig(max_periods=8, ss_rel_tol=1e-13)
    grid = ExcitationGrid([6.0], [6.0])
    with pytest.raises(SweepFailure) as exc:
        frf_sweep(plant, grid, cfg)
    assert "a=6" in str(exc.value) and "omega=6" in str(exc.value)


def test_sweep_failure_keep_fills_nan():
    # 14 periods cover the transient at omega = 0.5 but not at omega = 6
    plant = MdofPlant(duffing_preset())
    cfg = IntegratorConfig(max_periods=14)
    grid = ExcitationGrid([6.0], [0.5, 6.0])
    mats = frf_sweep(plant, grid, cfg, failure_action="keep")
    assert np.isfinite(mats[0].gains[0, 0])
    assert np.isnan(mats[0].gains[0, 1])
    assert [f[:2] for f in mats[0].failures] == [(0, 1)]


def test_frobenius_norm_policies():
    plant = MdofPlant(duffing_preset("linear"))
    mats = frf_sweep(plant, small_grid())
    fn = frobenius_norm(mats[0])
    assert fn == pytest.approx(np.sqrt(np.sum(mats[0].gains ** 2)))

    cfg = IntegratorConfig(max_periods=14)
    bad = frf_sweep(MdofPlant(duffing_preset()), ExcitationGrid([6.0], [0.5, 6.0]),
                    cfg, failure_action="keep")[0]
    with pytest.raises(ValueError):
        frobenius_norm(bad)                    # failures make the norm undefined
    with pytest.raises(SweepFailure):
        frobenius_norm(bad, failure_policy="abort")
    ex = frobenius_norm(bad, failure_policy="exclude")
    assert ex == pytest.approx(abs(bad.gains[0, 0]))


def test_sweep_determinism_across_runs():
    plant = MdofPlant(duffing_preset())
    a = frf_sweep(plant, small_grid())
    b = frf_sweep(plant, small_grid())
    assert a[0].gains.tobytes() == b[0].gains.tobytes()


def test_steady_cell_period_fit_respects_tolerance():
    # the refitted step used by a cell always divides the forcing period
    for om in (3.0, 5.5, 6.0, 8.25):
        n, h = fit_period_steps(2.0 * np.pi / om, IntegratorConfig().step_h)
        assert n * h == pytest.approx(2.0 * np.pi / om, rel=1e-12)
