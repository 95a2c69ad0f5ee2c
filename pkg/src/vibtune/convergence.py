"""Jacobian-based convergence diagnostics for the MDOF family.

A system is certified convergent on a region when the symmetric part of a
(possibly similarity-transformed) state Jacobian is uniformly negative
definite there.  The untransformed mechanical Jacobian has a zero diagonal
block, so its symmetric part can never be negative definite; the default
transform Upsilon = [[I, 0], [I, I]] mixes positions into the velocity
block and can certify sufficiently damped closed loops.  These checks are
diagnostics; the operational convergence test of the package is the
multi-initial-condition trajectory comparison.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np
from scipy.stats import qmc

from .control import PdGains
from .engine import IntegratorConfig, multi_ic_convergence
from .mdof import MdofSystem, eval_nonlinearity_jacobian

__all__ = [
    "JacobianReport",
    "DEFINITENESS_TOL",
    "jacobian_open_loop",
    "jacobian_closed_loop",
    "transformation_matrix",
    "generalized_jacobian",
    "definiteness_diagnostic",
    "sample_region_check",
    "empirical_convergence_check",
]

DEFINITENESS_TOL = 1e-10


@dataclass
class JacobianReport:
    """Outcome of a definiteness scan over a state region."""

    lambda_max_sym: float
    worst_state: list
    verdict: str
    n_samples: int = 1
    transformed: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def jacobian_open_loop(system: MdofSystem, x) -> np.ndarray:
    """State Jacobian [[0, I], [-M^-1 (K + dphi), -M^-1 C]] at state x."""
    x = np.asarray(x, dtype=float).ravel()
    n = system.n_q
    q = x[:n]
    phi_j = eval_nonlinearity_jacobian(system, q)
    top = np.hstack([np.zeros((n, n)), np.eye(n)])
    bottom = np.hstack([
        -system.minv @ (system.stiffness + phi_j),
        -system.minv @ system.damping,
    ])
    return np.vstack([top, bottom])


def jacobian_closed_loop(system: MdofSystem, gains: PdGains, x) -> np.ndarray:
    """Closed-loop Jacobian: stiffness gains K+Th_p, damping gains C+Th_d."""
    x = np.asarray(x, dtype=float).ravel()
    n = system.n_q
    q = x[:n]
    phi_j = eval_nonlinearity_jacobian(system, q)
    kk = system.stiffness + system.gam @ gains.theta_p + phi_j
    kc = system.damping + system.gam @ gains.theta_d
    top = np.hstack([np.zeros((n, n)), np.eye(n)])
    bottom = np.hstack([-system.minv @ kk, -system.minv @ kc])
    return np.vstack([top, bottom])


def transformation_matrix(n_q: int) -> np.ndarray:
    """Upsilon = [[I, 0], [I, I]] in the stacked (q, q') coordinates."""
    ups = np.eye(2 * n_q)
    ups[n_q:, :n_q] = np.eye(n_q)
    return ups


def generalized_jacobian(jac: np.ndarray, upsilon: np.ndarray = None) -> np.ndarray:
    """Similarity transform Upsilon J Upsilon^-1 (default Upsilon above)."""
    jac = np.asarray(jac, dtype=float)
    n2 = jac.shape[0]
    if upsilon is None:
        upsilon = transformation_matrix(n2 // 2)
    return upsilon @ jac @ np.linalg.inv(upsilon)


def definiteness_diagnostic(mat: np.ndarray) -> tuple:
    """Largest eigenvalue of the symmetric part and its verdict.

    "uniformly-negative" when the eigenvalue sits below -DEFINITENESS_TOL,
    otherwise "indefinite" (the form admits a non-negative direction).
    """
    mat = np.asarray(mat, dtype=float)
    lam = float(np.linalg.eigvalsh(0.5 * (mat + mat.T))[-1])
    verdict = "uniformly-negative" if lam < -DEFINITENESS_TOL else "indefinite"
    return lam, verdict


def sample_region_check(system: MdofSystem, gains: PdGains = None, state_box=None,
                        n_samples: int = 256, transform="default",
                        seed: int = 0) -> JacobianReport:
    """Scan a state box with a low-discrepancy sample, reporting the worst case.

    state_box is (lo, hi) over the stacked state; default is [-5, 5]^2n.
    transform: "default" applies Upsilon = [[I, 0], [I, I]]; None checks the
    raw Jacobian; or pass an explicit matrix.  The verdict is
    "uniformly-negative", "positive-somewhere", or "indefinite" (boundary).
    """
    n2 = 2 * system.n_q
    if state_box is None:
        state_box = (-5.0 * np.ones(n2), 5.0 * np.ones(n2))
    lo = np.asarray(state_box[0], dtype=float).ravel()
    hi = np.asarray(state_box[1], dtype=float).ravel()
    if lo.shape != (n2,) or hi.shape != (n2,) or np.any(hi < lo):
        raise ValueError("state_box must be (lo, hi) over the stacked state")
    sampler = qmc.Halton(d=n2, scramble=True, seed=seed)
    pts = lo + sampler.random(n_samples) * (hi - lo)

    if isinstance(transform, str):
        if transform != "default":
            raise ValueError(f"unknown transform {transform!r}")
        ups = transformation_matrix(system.n_q)
    else:
        ups = transform  # explicit matrix or None
    ups_inv = None if ups is None else np.linalg.inv(ups)

    worst_lam = -np.inf
    worst_state = pts[0]
    for x in pts:
        jac = (jacobian_open_loop(system, x) if gains is None
               else jacobian_closed_loop(system, gains, x))
        if ups is not None:
            jac = ups @ jac @ ups_inv
        lam = float(np.linalg.eigvalsh(0.5 * (jac + jac.T))[-1])
        if lam > worst_lam:
            worst_lam = lam
            worst_state = x
    if worst_lam < -DEFINITENESS_TOL:
        verdict = "uniformly-negative"
    elif worst_lam > DEFINITENESS_TOL:
        verdict = "positive-somewhere"
    else:
        verdict = "indefinite"
    return JacobianReport(worst_lam, [float(v) for v in worst_state], verdict,
                          n_samples=n_samples, transformed=ups is not None)


def empirical_convergence_check(dynamics, input_period, initial_states, horizon=60.0,
                                config: IntegratorConfig = None,
                                distance_tol: float = 1e-3):
    """Operational convergence test: trajectories from different initial
    conditions must collapse below distance_tol by the end of the horizon.

    Returns (passed, MultiIcReport).
    """
    rep = multi_ic_convergence(dynamics, input_period, initial_states, horizon, config)
    return bool(rep.terminal_max_distance < distance_tol), rep
