"""Compiled inner loops for the two closed-loop plants swept by the FRF engine.

Everything here mirrors the generic closure-based path in engine.py; the
kernels exist purely for speed (a full amplitude x frequency sweep touches
millions of RK4 steps).  When numba is unavailable the package silently
falls back to the generic path, so these signatures are internal.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    NUMBA_OK = True
except ImportError:  # pragma: no cover - exercised only without numba
    NUMBA_OK = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


# ---------------------------------------------------------------------------
# MDOF closed loop:  M q'' + (C+Th_d) q' + (K+Th_p) q + phi(q) = lam * a sin(om t)
# Gains arrive pre-merged into cd = C + gam@Th_d and kp = K + gam@Th_p.
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _mdof_rhs(x, t, minv, cd, kp, nl_exp, nl_coef, lam, a, om, frc, out):
    n = frc.size
    wval = a * np.sin(om * t)
    for i in range(n):
        f = lam[i] * wval
        for j in range(n):
            f -= kp[i, j] * x[j] + cd[i, j] * x[n + j]
        qi = x[i]
        for m in range(nl_exp.shape[1]):
            e = nl_exp[i, m]
            if e > 0:
                f -= nl_coef[i, m] * qi ** e
        frc[i] = f
    for i in range(n):
        out[i] = x[n + i]
        acc = 0.0
        for j in range(n):
            acc += minv[i, j] * frc[j]
        out[n + i] = acc


@njit(cache=True, nogil=True)
def mdof_period_peaks(x0, t0, minv, cd, kp, nl_exp, nl_coef, lam, a, om,
                      h, n_steps, n_periods):
    """Integrate whole excitation periods; per-period peaks of |q|,|q'|.

    Returns (peaks, x_final, t_final, periods_done).  periods_done <
    n_periods signals non-finite state at the reported time.
    """
    n = lam.size
    dim = 2 * n
    x = x0.copy()
    xt = np.empty(dim)
    k1 = np.empty(dim)
    k2 = np.empty(dim)
    k3 = np.empty(dim)
    k4 = np.empty(dim)
    frc = np.empty(n)
    peaks = np.zeros((n_periods, dim))
    t = t0
    for p in range(n_periods):
        for _ in range(n_steps):
            _mdof_rhs(x, t, minv, cd, kp, nl_exp, nl_coef, lam, a, om, frc, k1)
            for i in range(dim):
                xt[i] = x[i] + 0.5 * h * k1[i]
            _mdof_rhs(xt, t + 0.5 * h, minv, cd, kp, nl_exp, nl_coef, lam, a, om, frc, k2)
            for i in range(dim):
                xt[i] = x[i] + 0.5 * h * k2[i]
            _mdof_rhs(xt, t + 0.5 * h, minv, cd, kp, nl_exp, nl_coef, lam, a, om, frc, k3)
            for i in range(dim):
                xt[i] = x[i] + h * k3[i]
            _mdof_rhs(xt, t + h, minv, cd, kp, nl_exp, nl_coef, lam, a, om, frc, k4)
            for i in range(dim):
                x[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            t += h
            for i in range(dim):
                ax = abs(x[i])
                if ax > peaks[p, i]:
                    peaks[p, i] = ax
        ok = True
        for i in range(dim):
            if not np.isfinite(x[i]):
                ok = False
        if not ok:
            return peaks, x, t, p
    return peaks, x, t, n_periods


# ---------------------------------------------------------------------------
# Satellite attitude loop in body coordinates with the energy-based tracking
# controller and a diagonal PD vibration term, all in MRP space.
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _mrp_jac3(q, out):
    # J = 0.25 * ((1 - q.q) I + 2 skew(q) + 2 q q^T)
    qq = q[0] * q[0] + q[1] * q[1] + q[2] * q[2]
    s = 1.0 - qq
    out[0, 0] = 0.25 * (s + 2.0 * q[0] * q[0])
    out[0, 1] = 0.25 * (-2.0 * q[2] + 2.0 * q[0] * q[1])
    out[0, 2] = 0.25 * (2.0 * q[1] + 2.0 * q[0] * q[2])
    out[1, 0] = 0.25 * (2.0 * q[2] + 2.0 * q[1] * q[0])
    out[1, 1] = 0.25 * (s + 2.0 * q[1] * q[1])
    out[1, 2] = 0.25 * (-2.0 * q[0] + 2.0 * q[1] * q[2])
    out[2, 0] = 0.25 * (-2.0 * q[1] + 2.0 * q[2] * q[0])
    out[2, 1] = 0.25 * (2.0 * q[0] + 2.0 * q[2] * q[1])
    out[2, 2] = 0.25 * (s + 2.0 * q[2] * q[2])


@njit(cache=True, nogil=True)
def _inv3(a, out):
    d = (a[0, 0] * (a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1])
         - a[0, 1] * (a[1, 0] * a[2, 2] - a[1, 2] * a[2, 0])
         + a[0, 2] * (a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0]))
    inv_d = 1.0 / d
    out[0, 0] = (a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1]) * inv_d
    out[0, 1] = (a[0, 2] * a[2, 1] - a[0, 1] * a[2, 2]) * inv_d
    out[0, 2] = (a[0, 1] * a[1, 2] - a[0, 2] * a[1, 1]) * inv_d
    out[1, 0] = (a[1, 2] * a[2, 0] - a[1, 0] * a[2, 2]) * inv_d
    out[1, 1] = (a[0, 0] * a[2, 2] - a[0, 2] * a[2, 0]) * inv_d
    out[1, 2] = (a[0, 2] * a[1, 0] - a[0, 0] * a[1, 2]) * inv_d
    out[2, 0] = (a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0]) * inv_d
    out[2, 1] = (a[0, 1] * a[2, 0] - a[0, 0] * a[2, 1]) * inv_d
    out[2, 2] = (a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]) * inv_d


@njit(cache=True, nogil=True)
def _sat_mass_coriolis(q, qdot, hdiag, js, jinv, hs, cs, djdq, g, dh, work):
    """H_s = Jinv^T H Jinv and the Christoffel Coriolis matrix at (q, qdot).

    dH_s/dq_k = -(G_k^T H_s + H_s G_k) with G_k = (dJ/dq_k) Jinv, which
    follows from H_s = Jinv^T H Jinv; the Christoffel combination of those
    partials makes dH_s/dt - 2 C_s skew-symmetric.
    """
    # hs = jinv.T @ diag(hdiag) @ jinv
    for i in range(3):
        for j in range(3):
            acc = 0.0
            for m in range(3):
                acc += jinv[m, i] * hdiag[m] * jinv[m, j]
            hs[i, j] = acc
    # partials dh[k] = dH_s/dq_k
    for k in range(3):
        # djdq = dJ/dq_k
        for i in range(3):
            for j in range(3):
                djdq[i, j] = -0.5 * q[k] * (1.0 if i == j else 0.0)
        # 0.25 * 2 * (e_k q^T + q e_k^T)
        for i in range(3):
            for j in range(3):
                val = 0.0
                if i == k:
                    val += q[j]
                if j == k:
                    val += q[i]
                djdq[i, j] += 0.5 * val
        if k == 0:
            djdq[1, 2] += -0.5
            djdq[2, 1] += 0.5
        elif k == 1:
            djdq[0, 2] += 0.5
            djdq[2, 0] += -0.5
        else:
            djdq[0, 1] += -0.5
            djdq[1, 0] += 0.5
        # g = djdq @ jinv
        for i in range(3):
            for j in range(3):
                acc = 0.0
                for m in range(3):
                    acc += djdq[i, m] * jinv[m, j]
                g[i, j] = acc
        # dh[k] = -(g^T hs + hs g)
        for i in range(3):
            for j in range(3):
                acc = 0.0
                for m in range(3):
                    acc += g[m, i] * hs[m, j] + hs[i, m] * g[m, j]
                dh[k, i, j] = -acc
    # Christoffel: C_ij = 0.5 * sum_k (dh[k,i,j] + dh[j,i,k] - dh[i,j,k]) qdot_k
    for i in range(3):
        for j in range(3):
            acc = 0.0
            for k in range(3):
                acc += (dh[k, i, j] + dh[j, i, k] - dh[i, j, k]) * qdot[k]
            cs[i, j] = 0.5 * acc


@njit(cache=True, nogil=True)
def _sat_rhs(y, t, hdiag, kr, lr, thp, thd, qd, infl, amps, oms, phs, out,
             js, jinv, hs, cs, djdq, g, dh, work):
    """Closed-loop satellite vector field; y = [q, omega_body]."""
    q = y[:3]
    w = y[3:]
    _mrp_jac3(q, js)
    _inv3(js, jinv)
    qdot = np.empty(3)
    for i in range(3):
        qdot[i] = js[i, 0] * w[0] + js[i, 1] * w[1] + js[i, 2] * w[2]
    _sat_mass_coriolis(q, qdot, hdiag, js, jinv, hs, cs, djdq, g, dh, work)
    # tracking references (constant attitude target)
    e = np.empty(3)
    r = np.empty(3)
    qdr = np.empty(3)
    qddr = np.empty(3)
    for i in range(3):
        e[i] = q[i] - qd[i]
        qdr[i] = -lr[i] * e[i]
        qddr[i] = -lr[i] * qdot[i]
        r[i] = qdot[i] - qdr[i]
    # generalized command: tau_s = H_s qddr + C_s qdr - Kr r - thp e - thd edot
    tau_s = np.empty(3)
    for i in range(3):
        acc = -kr[i] * r[i] - thp[i] * e[i] - thd[i] * qdot[i]
        for j in range(3):
            acc += hs[i, j] * qddr[j] + cs[i, j] * qdr[j]
        tau_s[i] = acc
    # body torque: J^T tau_s + disturbance
    wval = 0.0
    for m in range(amps.size):
        wval += amps[m] * np.sin(oms[m] * t + phs[m])
    hw0 = hdiag[0] * w[0]
    hw1 = hdiag[1] * w[1]
    hw2 = hdiag[2] * w[2]
    gy0 = w[1] * hw2 - w[2] * hw1
    gy1 = w[2] * hw0 - w[0] * hw2
    gy2 = w[0] * hw1 - w[1] * hw0
    for i in range(3):
        tb = infl[i] * wval
        for j in range(3):
            tb += js[j, i] * tau_s[j]
        gy = gy0 if i == 0 else (gy1 if i == 1 else gy2)
        out[3 + i] = (tb - gy) / hdiag[i]
        out[i] = qdot[i]


@njit(cache=True, nogil=True)
def satellite_period_peaks(y0, t0, hdiag, kr, lr, thp, thd, qd, infl,
                           amps, oms, phs, h, n_steps, n_periods):
    """Per-period peaks of |e| and |edot| for the tracking-controlled loop."""
    y = y0.copy()
    dim = 6
    xt = np.empty(dim)
    k1 = np.empty(dim)
    k2 = np.empty(dim)
    k3 = np.empty(dim)
    k4 = np.empty(dim)
    js = np.empty((3, 3))
    jinv = np.empty((3, 3))
    hs = np.empty((3, 3))
    cs = np.empty((3, 3))
    djdq = np.empty((3, 3))
    g = np.empty((3, 3))
    dh = np.empty((3, 3, 3))
    work = np.empty((3, 3))
    peaks = np.zeros((n_periods, 6))
    t = t0
    for p in range(n_periods):
        for _ in range(n_steps):
            _sat_rhs(y, t, hdiag, kr, lr, thp, thd, qd, infl, amps, oms, phs,
                     k1, js, jinv, hs, cs, djdq, g, dh, work)
            for i in range(dim):
                xt[i] = y[i] + 0.5 * h * k1[i]
            _sat_rhs(xt, t + 0.5 * h, hdiag, kr, lr, thp, thd, qd, infl, amps, oms, phs,
                     k2, js, jinv, hs, cs, djdq, g, dh, work)
            for i in range(dim):
                xt[i] = y[i] + 0.5 * h * k2[i]
            _sat_rhs(xt, t + 0.5 * h, hdiag, kr, lr, thp, thd, qd, infl, amps, oms, phs,
                     k3, js, jinv, hs, cs, djdq, g, dh, work)
            for i in range(dim):
                xt[i] = y[i] + h * k3[i]
            _sat_rhs(xt, t + h, hdiag, kr, lr, thp, thd, qd, infl, amps, oms, phs,
                     k4, js, jinv, hs, cs, djdq, g, dh, work)
            for i in range(dim):
                y[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            t += h
            # error channels: e then edot
            _mrp_jac3(y[:3], js)
            for i in range(3):
                ei = abs(y[i] - qd[i])
                if ei > peaks[p, i]:
                    peaks[p, i] = ei
                qdi = js[i, 0] * y[3] + js[i, 1] * y[4] + js[i, 2] * y[5]
                aqdi = abs(qdi)
                if aqdi > peaks[p, 3 + i]:
                    peaks[p, 3 + i] = aqdi
        ok = True
        for i in range(dim):
            if not np.isfinite(y[i]):
                ok = False
        if not ok:
            return peaks, y, t, p
    return peaks, y, t, n_periods


@njit(cache=True, nogil=True)
def satellite_error_trace(y0, t0, hdiag, kr, lr, thp, thd, qd, infl,
                          amps, oms, phs, h, n_total):
    """Full-resolution e / edot trace for RMS studies; returns (trace, y, ok)."""
    y = y0.copy()
    dim = 6
    xt = np.empty(dim)
    k1 = np.empty(dim)
    k2 = np.empty(dim)
    k3 = np.empty(dim)
    k4 = np.empty(dim)
    js = np.empty((3, 3))
    jinv = np.empty((3, 3))
    hs = np.empty((3, 3))
    cs = np.empty((3, 3))
    djdq = np.empty((3, 3))
    g = np.empty((3, 3))
    dh = np.empty((3, 3, 3))
    work = np.empty((3, 3))
    trace = np.empty((n_total + 1, 6))
    t = t0
    _mrp_jac3(y[:3], js)
    for i in range(3):
        trace[0, i] = y[i] - qd[i]
        trace[0, 3 + i] = js[i, 0] * y[3] + js[i, 1] * y[4] + js[i, 2] * y[5]
    for s in range(n_total):
        _sat_rhs(y, t, hdiag, kr, lr, thp, thd, qd, infl, amps, oms, phs,
                 k1, js, jinv, hs, cs, djdq, g, dh, work)
        for i in range(dim):
            xt[i] = y[i] + 0.5 * h * k1[i]
        _sat_rhs(xt, t + 0.5 * h, hdiag, kr, lr, thp, thd, qd, infl, amps, oms, phs,
                 k2, js, jinv, hs, cs, djdq, g, dh, work)
        for i in range(dim):
            xt[i] = y[i] + 0.5 * h * k2[i]
        _sat_rhs(xt, t + 0.5 * h, hdiag, kr, lr, thp, thd, qd, infl, amps, oms, phs,
                 k3, js, jinv, hs, cs, djdq, g, dh, work)
        for i in range(dim):
            xt[i] = y[i] + h * k3[i]
        _sat_rhs(xt, t + h, hdiag, kr, lr, thp, thd, qd, infl, amps, oms, phs,
                 k4, js, jinv, hs, cs, djdq, g, dh, work)
        for i in range(dim):
            y[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        t += h
        if not (np.isfinite(y[0]) and np.isfinite(y[3])):
            return trace, y, t, s
        _mrp_jac3(y[:3], js)
        for i in range(3):
            trace[s + 1, i] = y[i] - qd[i]
            trace[s + 1, 3 + i] = js[i, 0] * y[3] + js[i, 1] * y[4] + js[i, 2] * y[5]
    return trace, y, t, n_total
