"""Multi-degree-of-freedom mechanical models with odd polynomial stiffness.

The plant family is

    M q'' + C q' + K q + phi(q) = lam * w + gam @ u

where phi acts componentwise, phi_i(q) = sum_p b_{i,p} * q_i**(2p+1) with
positive coefficients, so the restoring force is odd and monotone.  The
classic Duffing oscillator used throughout the test suite is the single-DOF
member of this family.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "StateVector",
    "HarmonicInput",
    "MdofSystem",
    "eval_nonlinearity",
    "eval_nonlinearity_jacobian",
    "eval_dynamics",
    "duffing_preset",
]

# Relative floor for the smallest symmetric-part eigenvalue of M, C, K.
SPD_TOL = 1e-12


def _check_spd(name: str, mat: np.ndarray, n: int) -> np.ndarray:
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    if mat.shape != (n, n):
        raise ValueError(f"{name} must be {n}x{n}, got {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise ValueError(f"{name} contains non-finite entries")
    sym = 0.5 * (mat + mat.T)
    ev = np.linalg.eigvalsh(sym)
    if ev[0] <= SPD_TOL * abs(ev[-1]):
        raise ValueError(
            f"{name} is not positive definite (symmetric-part eigenvalues {ev})"
        )
    return mat


@dataclass
class StateVector:
    """Stacked state [q, q'] of an MDOF system."""

    x: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).ravel()
        if self.x.size == 0 or self.x.size % 2:
            raise ValueError(f"state length must be even and nonzero, got {self.x.size}")
        if not np.all(np.isfinite(self.x)):
            raise ValueError("state contains non-finite entries")

    @classmethod
    def from_parts(cls, q, qdot) -> "StateVector":
        q = np.atleast_1d(np.asarray(q, dtype=float))
        qdot = np.atleast_1d(np.asarray(qdot, dtype=float))
        if q.shape != qdot.shape:
            raise ValueError("q and qdot must have matching shapes")
        return cls(np.concatenate([q, qdot]))

    @property
    def n_q(self) -> int:
        return self.x.size // 2

    @property
    def q(self) -> np.ndarray:
        return self.x[: self.n_q]

    @property
    def qdot(self) -> np.ndarray:
        return self.x[self.n_q :]


@dataclass
class HarmonicInput:
    """Single-harmonic excitation w(t) = a*sin(omega*t + phase)."""

    a: float
    omega: float
    phase: float = 0.0

    def __post_init__(self):
        if not (self.a > 0.0 and np.isfinite(self.a)):
            raise ValueError(f"amplitude must be positive, got {self.a}")
        if not (self.omega > 0.0 and np.isfinite(self.omega)):
            raise ValueError(f"frequency must be positive, got {self.omega}")

    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.omega

    def __call__(self, t):
        return self.a * np.sin(self.omega * np.asarray(t) + self.phase)


@dataclass(eq=False)
class MdofSystem:
    """Mechanical system M q'' + C q' + K q + phi(q) = lam*w + gam@u.

    Parameters
    ----------
    mass, damping, stiffness : (n_q, n_q) arrays
        Positive definite (checked through symmetric-part eigenvalues).
    nonlin : list over DOFs of lists of (p, b) pairs
        Each pair contributes b * q**(2p+1) to the restoring force of its
        DOF; p >= 1 integer, b > 0.  An empty list means a linear DOF.
    lam : (n_q,) array
        Disturbance influence; defaults to ones.
    gam : (n_q, n_q) array
        Control influence; defaults to identity.
    """

    mass: np.ndarray
    damping: np.ndarray
    stiffness: np.ndarray
    nonlin: list = field(default_factory=list)
    lam: np.ndarray = None
    gam: np.ndarray = None

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.mass, dtype=float))
        n = m.shape[0]
        self.mass = _check_spd("mass", m, n)
        self.damping = _check_spd("damping", self.damping, n)
        self.stiffness = _check_spd("stiffness", self.stiffness, n)
        self.minv = np.linalg.inv(self.mass)

        if self.nonlin is None:
            self.nonlin = []
        nl = [list(terms) for terms in self.nonlin]
        nl += [[] for _ in range(n - len(nl))]
        if len(nl) != n:
            raise ValueError(f"nonlin has {len(nl)} entries for {n} DOFs")
        for i, terms in enumerate(nl):
            for p, b in terms:
                if int(p) != p or p < 1:
                    raise ValueError(f"DOF {i}: order p must be an integer >= 1, got {p}")
                if not b > 0.0:
                    raise ValueError(f"DOF {i}: coefficient must be positive, got {b}")
        self.nonlin = nl

        self.lam = np.ones(n) if self.lam is None else np.asarray(self.lam, dtype=float).ravel()
        if self.lam.shape != (n,):
            raise ValueError(f"lam must have shape ({n},)")
        self.gam = np.eye(n) if self.gam is None else np.atleast_2d(np.asarray(self.gam, dtype=float))
        if self.gam.shape != (n, n):
            raise ValueError(f"gam must be {n}x{n}")

    @property
    def n_q(self) -> int:
        return self.mass.shape[0]

    def natural_frequencies(self) -> np.ndarray:
        """Undamped natural frequencies sqrt(eig(M^-1 K)), ascending."""
        ev = np.linalg.eigvals(self.minv @ self.stiffness)
        return np.sort(np.sqrt(np.abs(ev.real)))


def eval_nonlinearity(system: MdofSystem, q) -> np.ndarray:
    """Componentwise odd restoring force phi(q)."""
    q = np.atleast_1d(np.asarray(q, dtype=float))
    out = np.zeros_like(q)
    for i, terms in enumerate(system.nonlin):
        for p, b in terms:
            out[i] += b * q[i] ** (2 * p + 1)
    return out


def eval_nonlinearity_jacobian(system: MdofSystem, q) -> np.ndarray:
    """Diagonal Jacobian d phi / d q; entries sum_p b*(2p+1)*q**(2p)."""
    q = np.atleast_1d(np.asarray(q, dtype=float))
    diag = np.zeros_like(q)
    for i, terms in enumerate(system.nonlin):
        for p, b in terms:
            diag[i] += b * (2 * p + 1) * q[i] ** (2 * p)
    return np.diag(diag)


def eval_dynamics(system: MdofSystem, x, w=0.0, u=None) -> np.ndarray:
    """First-order vector field for the stacked state [q, q'].

    w may be a scalar (scaled by the influence vector lam) or a per-DOF
    vector; u is a per-DOF control force routed through gam.
    """
    x = np.asarray(x, dtype=float)
    n = system.n_q
    q, qd = x[:n], x[n:]
    force = system.lam * w
    if u is not None:
        force = force + system.gam @ np.asarray(u, dtype=float)
    acc = system.minv @ (
        force - system.damping @ qd - system.stiffness @ q - eval_nonlinearity(system, q)
    )
    return np.concatenate([qd, acc])


def duffing_preset(variant: str = "nonlinear-36") -> MdofSystem:
    """Single-DOF Duffing oscillator presets.

    variant: "nonlinear-36" (cubic coefficient 36), "linear" (no cubic
    term), or "nonlinear-100" (stronger hardening).
    """
    cubic = {"nonlinear-36": 36.0, "linear": 0.0, "nonlinear-100": 100.0}
    if variant not in cubic:
        raise ValueError(f"unknown variant {variant!r}, expected one of {sorted(cubic)}")
    b = cubic[variant]
    nonlin = [[(1, b)]] if b else [[]]
    return MdofSystem(
        mass=[[1.0]], damping=[[0.4]], stiffness=[[36.0]], nonlin=nonlin
    )
