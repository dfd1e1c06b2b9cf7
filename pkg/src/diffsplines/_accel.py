"""JIT-compiled stepping loops for the hot paths.

Every loop here has a pure-numpy twin next to its caller; this module is
selected at import time unless ``DIFFSPLINES_NO_NUMBA=1`` (or numba is
missing), in which case callers fall back to the numpy path.  The benchmark
script under ``benchmarks/`` times the two against each other.
"""

from __future__ import annotations

import os

import numpy as np

_flag = os.environ.get("DIFFSPLINES_NO_NUMBA", "0").strip().lower()
USE_NUMBA = _flag not in {"1", "true", "yes", "on"}

if USE_NUMBA:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        USE_NUMBA = False

if not USE_NUMBA:
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def decorate(func):
            return func

        return decorate


@njit(cache=True)
def kernel_scalar(s, t, ds, variant):
    # Piecewise-cubic closed form; variant 1 adds the ambient affine part 1+st.
    C = -1.0 + 0.5 * (s + t) - s * t / 3.0
    if ds == 0:
        if s <= t:
            lo, hi = s, t
        else:
            lo, hi = t, s
        val = lo * lo * hi * 0.5 - lo * lo * lo / 6.0 + C * (s * t) ** 2
        if variant == 1:
            val += 1.0 + s * t
        return val
    Cs = 0.5 - t / 3.0
    if ds == 1:
        if s <= t:
            base = s * t - 0.5 * s * s
        else:
            base = 0.5 * t * t
        val = base + Cs * (s * t) ** 2 + 2.0 * C * s * t * t
        if variant == 1:
            val += t
        return val
    if s <= t:
        base = t - s
    else:
        base = 0.0
    return base + 4.0 * Cs * s * t * t + 2.0 * C * t * t


@njit(cache=True)
def _landmark_rhs_into(q, p, phi, probes, variant, dq, dp, dphi, dprobes):
    nl = q.size
    for i in range(nl):
        acc_v = 0.0
        acc_d = 0.0
        for j in range(nl):
            acc_v += kernel_scalar(q[i], q[j], 0, variant) * p[j]
            acc_d += kernel_scalar(q[i], q[j], 1, variant) * p[j]
        dq[i] = acc_v
        dp[i] = -p[i] * acc_d
    for a in range(phi.size):
        acc = 0.0
        for j in range(nl):
            acc += kernel_scalar(phi[a], q[j], 0, variant) * p[j]
        dphi[a] = acc
    for r in range(probes.shape[0]):
        v = 0.0
        dv = 0.0
        for j in range(nl):
            v += kernel_scalar(probes[r, 0], q[j], 0, variant) * p[j]
            dv += kernel_scalar(probes[r, 0], q[j], 1, variant) * p[j]
        dprobes[r, 0] = v
        dprobes[r, 1] = dv * probes[r, 1]


@njit(cache=True)
def landmark_loop(q0, p0, phi0, probes0, dt, nsteps, variant, eps_sep):
    """RK4 sweep of landmarks + passive flow nodes + Jacobian probes.

    Returns (qs, ps, phis, probes, status, fail_step) with status 0 ok,
    1 collision/escape, 2 non-finite state.
    """
    nl = q0.size
    nf = phi0.size
    npr = probes0.shape[0]
    qs = np.empty((nsteps + 1, nl))
    ps = np.empty((nsteps + 1, nl))
    phis = np.empty((nsteps + 1, nf))
    prs = np.empty((nsteps + 1, npr, 2))
    qs[0] = q0
    ps[0] = p0
    phis[0] = phi0
    prs[0] = probes0

    q = q0.copy()
    p = p0.copy()
    phi = phi0.copy()
    pr = probes0.copy()

    k1q = np.empty(nl); k1p = np.empty(nl)
    k2q = np.empty(nl); k2p = np.empty(nl)
    k3q = np.empty(nl); k3p = np.empty(nl)
    k4q = np.empty(nl); k4p = np.empty(nl)
    k1f = np.empty(nf); k2f = np.empty(nf); k3f = np.empty(nf); k4f = np.empty(nf)
    k1r = np.empty((npr, 2)); k2r = np.empty((npr, 2))
    k3r = np.empty((npr, 2)); k4r = np.empty((npr, 2))

    for step in range(nsteps):
        _landmark_rhs_into(q, p, phi, pr, variant, k1q, k1p, k1f, k1r)
        _landmark_rhs_into(q + 0.5 * dt * k1q, p + 0.5 * dt * k1p,
                           phi + 0.5 * dt * k1f, pr + 0.5 * dt * k1r,
                           variant, k2q, k2p, k2f, k2r)
        _landmark_rhs_into(q + 0.5 * dt * k2q, p + 0.5 * dt * k2p,
                           phi + 0.5 * dt * k2f, pr + 0.5 * dt * k2r,
                           variant, k3q, k3p, k3f, k3r)
        _landmark_rhs_into(q + dt * k3q, p + dt * k3p,
                           phi + dt * k3f, pr + dt * k3r,
                           variant, k4q, k4p, k4f, k4r)
        c = dt / 6.0
        q = q + c * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
        p = p + c * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        phi = phi + c * (k1f + 2.0 * k2f + 2.0 * k3f + k4f)
        pr = pr + c * (k1r + 2.0 * k2r + 2.0 * k3r + k4r)

        ok = True
        for i in range(nl):
            if not np.isfinite(q[i]) or not np.isfinite(p[i]):
                ok = False
        if not ok:
            return qs, ps, phis, prs, 2, step + 1
        for i in range(nl):
            if q[i] <= 0.0 or q[i] >= 1.0:
                return qs, ps, phis, prs, 1, step + 1
            for j in range(i + 1, nl):
                if abs(q[i] - q[j]) < eps_sep:
                    return qs, ps, phis, prs, 1, step + 1
        qs[step + 1] = q
        ps[step + 1] = p
        phis[step + 1] = phi
        prs[step + 1] = pr
    return qs, ps, phis, prs, 0, nsteps


@njit(cache=True)
def _cumtrapz_into(v, h, out):
    acc = 0.0
    out[0] = 0.0
    for i in range(1, v.size):
        acc += 0.5 * h * (v[i] + v[i - 1])
        out[i] = acc


@njit(cache=True)
def _trapz(v, h):
    acc = 0.0
    for i in range(1, v.size):
        acc += 0.5 * h * (v[i] + v[i - 1])
    return acc


@njit(cache=True)
def _pq_rhs_into(q, p, h, dq, dp, eta, phi, work):
    n = q.size
    _cumtrapz_into(q, h, work)
    for i in range(n):
        eta[i] = np.exp(work[i])
    _cumtrapz_into(eta, h, phi)
    for i in range(n):
        dq[i] = eta[i] * p[i]
        work[i] = eta[i] * p[i] * p[i]
    total = _trapz(work, h)
    _cumtrapz_into(work, h, dp)          # dp holds cumulative of eta p^2
    a = 0.0
    c = 0.0
    for i in range(n):
        w = work[i] * phi[i]             # eta p^2 phi
        if i == 0 or i == n - 1:
            a += 0.25 * h * w
            c += 0.125 * h * w * phi[i]
        else:
            a += 0.5 * h * w
            c += 0.25 * h * w * phi[i]
    _cumtrapz_into(dq, h, work)          # work = cumulative of eta p = int_0^x q_dot
    b = 0.0
    for i in range(n):
        w = eta[i] * work[i] * work[i]
        if i == 0 or i == n - 1:
            b += 0.75 * h * w
        else:
            b += 1.5 * h * w
    co1 = 4.0 * a - 6.0 * (b + c)
    co2 = -6.0 * a + 12.0 * (b + c)
    for i in range(n):
        dp[i] = -0.5 * (total - dp[i]) + co1 + co2 * phi[i]


@njit(cache=True)
def pq_loop(q0, p0, h, dt, nsteps, reproject):
    """RK4 sweep of the constrained momentum system on the q-grid.

    Returns (qs, ps, res, status, fail_step); res[k] = (int q dx,
    int eta dx - 1) after step k; status 2 flags a non-finite state.
    """
    n = q0.size
    qs = np.empty((nsteps + 1, n))
    ps = np.empty((nsteps + 1, n))
    res = np.zeros((nsteps + 1, 2))
    qs[0] = q0
    ps[0] = p0
    q = q0.copy()
    p = p0.copy()
    dq1 = np.empty(n); dp1 = np.empty(n)
    dq2 = np.empty(n); dp2 = np.empty(n)
    dq3 = np.empty(n); dp3 = np.empty(n)
    dq4 = np.empty(n); dp4 = np.empty(n)
    eta = np.empty(n); phi = np.empty(n); work = np.empty(n)

    _cumtrapz_into(q, h, work)
    for i in range(n):
        eta[i] = np.exp(work[i])
    res[0, 0] = _trapz(q, h)
    res[0, 1] = _trapz(eta, h) - 1.0

    for step in range(nsteps):
        _pq_rhs_into(q, p, h, dq1, dp1, eta, phi, work)
        _pq_rhs_into(q + 0.5 * dt * dq1, p + 0.5 * dt * dp1, h, dq2, dp2, eta, phi, work)
        _pq_rhs_into(q + 0.5 * dt * dq2, p + 0.5 * dt * dp2, h, dq3, dp3, eta, phi, work)
        _pq_rhs_into(q + dt * dq3, p + dt * dp3, h, dq4, dp4, eta, phi, work)
        c = dt / 6.0
        q = q + c * (dq1 + 2.0 * dq2 + 2.0 * dq3 + dq4)
        p = p + c * (dp1 + 2.0 * dp2 + 2.0 * dp3 + dp4)

        _cumtrapz_into(q, h, work)
        for i in range(n):
            eta[i] = np.exp(work[i])
        _cumtrapz_into(eta, h, phi)

        if reproject:
            # q repair: one Newton step on the residuals along span{eta, phi*eta}
            r1 = _trapz(q, h)
            r2 = _trapz(eta, h) - 1.0
            j11 = _trapz(eta, h)
            j12 = 0.0
            j21 = 0.0
            j22 = 0.0
            for i in range(n):
                w = eta[i] * phi[i]
                if i == 0 or i == n - 1:
                    j12 += 0.5 * h * w
                    j21 += 0.5 * h * w
                    j22 += 0.25 * h * w * phi[i]
                else:
                    j12 += h * w
                    j21 += h * w
                    j22 += 0.5 * h * w * phi[i]
            det = j11 * j22 - j12 * j21
            ca = (-r1 * j22 + r2 * j12) / det
            cb = (-j11 * r2 + j21 * r1) / det
            for i in range(n):
                q[i] += ca * eta[i] + cb * eta[i] * phi[i]
            _cumtrapz_into(q, h, work)
            for i in range(n):
                eta[i] = np.exp(work[i])
            _cumtrapz_into(eta, h, phi)
            # p repair: canonical cotangent representative (discrete Gram)
            m1 = 0.0
            m2 = 0.0
            g11 = 0.0
            g12 = 0.0
            g22 = 0.0
            for i in range(n):
                wt = 0.5 * h if (i == 0 or i == n - 1) else h
                w = p[i] * eta[i]
                m1 += wt * w
                m2 += wt * w * phi[i]
                g11 += wt * eta[i]
                g12 += wt * eta[i] * phi[i]
                g22 += wt * eta[i] * phi[i] * phi[i]
            gdet = g11 * g22 - g12 * g12
            c1 = (g22 * m1 - g12 * m2) / gdet
            c2 = (g11 * m2 - g12 * m1) / gdet
            for i in range(n):
                p[i] -= c1 + c2 * phi[i]

        finite = True
        for i in range(n):
            if not (np.isfinite(q[i]) and np.isfinite(p[i])):
                finite = False
        if not finite:
            return qs, ps, res, 2, step + 1
        qs[step + 1] = q
        ps[step + 1] = p
        res[step + 1, 0] = _trapz(q, h)
        res[step + 1, 1] = _trapz(eta, h) - 1.0
    return qs, ps, res, 0, nsteps


@njit(cache=True)
def _riccati_step(g, m0, m1, e0, e1, dt):
    # RK4 step for dg/dt = m(t) - g^2/eta(t), coefficients linear in t.
    mm = 0.5 * (m0 + m1)
    em = 0.5 * (e0 + e1)
    k1 = m0 - g * g / e0
    g2 = g + 0.5 * dt * k1
    k2 = mm - g2 * g2 / em
    g3 = g + 0.5 * dt * k2
    k3 = mm - g3 * g3 / em
    g4 = g + dt * k3
    k4 = m1 - g4 * g4 / e1
    return g + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


POLE_JUMP = 1e4  # upward jump from a deep negative value = stepped-over pole


@njit(cache=True)
def _riccati_escaped(g_old, g_new, gmax):
    if not np.isfinite(g_new) or abs(g_new) > gmax:
        return True
    # a tangent-type pole inside the step flips the branch: the solution
    # cannot increase once it is far below the equilibrium band
    return g_old < -POLE_JUMP and g_new > g_old + POLE_JUMP


@njit(cache=True)
def riccati_sweep(m_coef, eta, g0, dt, gmax, refine_tol):
    """Forward nodewise sweep of dg/dt = m - g^2/eta with escape bisection.

    Returns (g, blown, t_blow); after a node escapes its rows are NaN and
    t_blow brackets the escape to refine_tol.
    """
    nsteps = m_coef.shape[0] - 1
    n = m_coef.shape[1]
    g = np.full((nsteps + 1, n), np.nan)
    blown = np.zeros(n, dtype=np.bool_)
    t_blow = np.full(n, np.nan)
    for j in range(n):
        gj = g0[j]
        g[0, j] = gj
        for k in range(nsteps):
            gn = _riccati_step(gj, m_coef[k, j], m_coef[k + 1, j],
                               eta[k, j], eta[k + 1, j], dt)
            if _riccati_escaped(gj, gn, gmax):
                # bisect inside [t_k, t_k + dt]
                lo = 0.0
                hi = dt
                while hi - lo > refine_tol:
                    mid = 0.5 * (lo + hi)
                    th = mid / dt
                    m_mid = (1.0 - th) * m_coef[k, j] + th * m_coef[k + 1, j]
                    e_mid = (1.0 - th) * eta[k, j] + th * eta[k + 1, j]
                    gm = _riccati_step(gj, m_coef[k, j], m_mid,
                                       eta[k, j], e_mid, mid)
                    if _riccati_escaped(gj, gm, gmax):
                        hi = mid
                    else:
                        lo = mid
                blown[j] = True
                t_blow[j] = k * dt + 0.5 * (lo + hi)
                break
            gj = gn
            g[k + 1, j] = gj
    return g, blown, t_blow


@njit(cache=True)
def riccati_linear_sweep(m_coef, eta, u0, w0, dt):
    """Forward sweep of the equivalent linear system u' = w/eta, w' = m u."""
    nsteps = m_coef.shape[0] - 1
    n = m_coef.shape[1]
    us = np.empty((nsteps + 1, n))
    ws = np.empty((nsteps + 1, n))
    us[0] = u0
    ws[0] = w0
    for j in range(n):
        u = u0[j]
        w = w0[j]
        for k in range(nsteps):
            m0 = m_coef[k, j]; m1 = m_coef[k + 1, j]
            e0 = eta[k, j]; e1 = eta[k + 1, j]
            mm = 0.5 * (m0 + m1)
            em = 0.5 * (e0 + e1)
            k1u = w / e0; k1w = m0 * u
            u2 = u + 0.5 * dt * k1u; w2 = w + 0.5 * dt * k1w
            k2u = w2 / em; k2w = mm * u2
            u3 = u + 0.5 * dt * k2u; w3 = w + 0.5 * dt * k2w
            k3u = w3 / em; k3w = mm * u3
            u4 = u + dt * k3u; w4 = w + dt * k3w
            k4u = w4 / e1; k4w = m1 * u4
            u = u + dt / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
            w = w + dt / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
            us[k + 1, j] = u
            ws[k + 1, j] = w
    return us, ws
