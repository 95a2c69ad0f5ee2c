"""Hand-computed oracles for the MDOF model: matrices, cubic terms, dynamics."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from vibtune import (MdofSystem, duffing_preset, eval_dynamics,
                     eval_nonlinearity, eval_nonlinearity_jacobian)


def _duffing(b=36.0):
    nonlin = [[(1, b)]] if b else [[]]
    return MdofSystem([[1.0]], [[0.4]], [[36.0]], nonlin=nonlin)


def test_duffing_preset_variants():
    sys36 = duffing_preset()
    assert sys36.mass[0, 0] == 1.0
    assert sys36.damping[0, 0] == 0.4
    assert sys36.stiffness[0, 0] == 36.0
    assert sys36.nonlin == [[(1, 36.0)]]
    assert duffing_preset("linear").nonlin == [[]]
    assert duffing_preset("nonlinear-100").nonlin == [[(1, 100.0)]]
    with pytest.raises(ValueError):
        duffing_preset("cubic-9000")


def test_construction_rejects_bad_shapes_and_indefinite_matrices():
    with pytest.raises(ValueError):
        MdofSystem([[1.0, 0.0]], [[0.4]], [[36.0]])
    with pytest.raises(ValueError):
        MdofSystem([[0.0]], [[0.4]], [[36.0]])        # singular mass
    with pytest.raises(ValueError):
        MdofSystem([[1.0]], [[-0.1]], [[36.0]])       # negative damping
    with pytest.raises(ValueError):
        MdofSystem([[1.0]], [[0.4]], [[36.0]], nonlin=[[(1, -5.0)]])
    with pytest.raises(ValueError):
        MdofSystem([[1.0]], [[0.4]], [[36.0]], nonlin=[[(0, 1.0)]])


def test_cubic_values():
    sys_ = _duffing(36.0)
    assert eval_nonlinearity(sys_, [0.0])[0] == 0.0
    assert eval_nonlinearity(sys_, [1.0])[0] == 36.0
    assert eval_nonlinearity(sys_, [-2.0])[0] == -288.0   # odd: 36*(-8)


def test_cubic_jacobian_values():
    sys36 = _duffing(36.0)
    assert eval_nonlinearity_jacobian(sys36, [0.0])[0, 0] == 0.0
    assert eval_nonlinearity_jacobian(sys36, [1.0])[0, 0] == 108.0
    sys100 = _duffing(100.0)
    assert eval_nonlinearity_jacobian(sys100, [0.5])[0, 0] == 75.0  # 3*100*0.25


def test_cubic_jacobian_matches_finite_difference():
    rng = np.random.default_rng(7)
    sys_ = MdofSystem(np.eye(2), 0.3 * np.eye(2), 10.0 * np.eye(2),
                      nonlin=[[(1, 4.0)], [(1, 2.0), (2, 0.5)]])
    eps = 1e-6
    for _ in range(25):
        q = rng.uniform(-2.0, 2.0, 2)
        jac = eval_nonlinearity_jacobian(sys_, q)
        fd = np.empty((2, 2))
        for k in range(2):
            dq = np.zeros(2)
            dq[k] = eps
            fd[:, k] = (eval_nonlinearity(sys_, q + dq)
                        - eval_nonlinearity(sys_, q - dq)) / (2 * eps)
        assert_allclose(jac, fd, rtol=0, atol=1e-5)


def test_dynamics_equilibrium_and_hand_values():
    sys_ = _duffing(36.0)
    assert_allclose(eval_dynamics(sys_, np.zeros(2), 0.0, np.zeros(1)), [0.0, 0.0])
    # x = (1, 0): accel = -(36*1 + 36*1)/1
    assert_allclose(eval_dynamics(sys_, [1.0, 0.0], 0.0, np.zeros(1)), [0.0, -72.0])
    # x = (0, 1), w = 2: accel = -0.4*1 + 2
    assert_allclose(eval_dynamics(sys_, [0.0, 1.0], 2.0, np.zeros(1)), [1.0, 1.6])


def test_dynamics_affine_in_inputs():
    # the state derivative is affine in (w, u), so superposition must hold
    rng = np.random.default_rng(3)
    sys_ = _duffing(36.0)
    for _ in range(20):
        x = rng.uniform(-2, 2, 2)
        w1, w2 = rng.uniform(-3, 3, 2)
        u1, u2 = rng.uniform(-3, 3, 2)
        base = eval_dynamics(sys_, x, 0.0, np.zeros(1))
        d1 = eval_dynamics(sys_, x, w1, np.array([u1])) - base
        d2 = eval_dynamics(sys_, x, w2, np.array([u2])) - base
        both = eval_dynamics(sys_, x, w1 + w2, np.array([u1 + u2])) - base
        assert_allclose(both, d1 + d2, rtol=0, atol=1e-12)


def test_natural_frequency_single_dof():
    assert_allclose(_duffing(0.0).natural_frequencies(), [6.0])


def test_natural_frequencies_match_eigensolver():
    rng = np.random.default_rng(11)
    for _ in range(10):
        a = rng.standard_normal((3, 3))
        m = a @ a.T + 3.0 * np.eye(3)
        b = rng.standard_normal((3, 3))
        k = b @ b.T + 5.0 * np.eye(3)
        sys_ = MdofSystem(m, 0.1 * np.eye(3), k)
        lam = np.linalg.eigvals(np.linalg.solve(m, k))
        expected = np.sort(np.sqrt(np.real(lam)))
        assert_allclose(sys_.natural_frequencies(), expected, rtol=1e-10)


def test_input_routing_lam_gam():
    # 2-DOF chain: disturbance enters DOF 1 only, control DOF 2 only
    sys_ = MdofSystem(np.eye(2), 0.2 * np.eye(2), np.eye(2),
                      lam=[1.0, 0.0], gam=[[0.0, 0.0], [0.0, 1.0]])
    dx = eval_dynamics(sys_, np.zeros(4), 3.0, np.array([0.0, 5.0]))
    assert_allclose(dx, [0.0, 0.0, 3.0, 5.0])
