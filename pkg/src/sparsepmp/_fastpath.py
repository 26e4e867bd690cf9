"""
_fastpath.py
------------

Fused stepper for autonomous linear plants with the affine bang-off-bang
rule.  RK4 with a frozen control on a linear system collapses to constant
step matrices (the degree-4 Taylor polynomials of exp(hA)), so a whole
interval is a cheap matrix recurrence; switch instants are still located
by bisection exactly as in the generic path.  Semantics match
``integrate._integrate_interval_generic`` to rounding.

If numba is unavailable (or SPARSEPMP_NO_NUMBA is set) the module reports
AVAILABLE = False and callers use the generic path.
"""

from __future__ import annotations

import os

import numpy as np

AVAILABLE = False
if not os.environ.get("SPARSEPMP_NO_NUMBA"):
    try:
        from numba import njit

        AVAILABLE = True
    except ImportError:  # pragma: no cover
        AVAILABLE = False

if AVAILABLE:

    @njit(cache=True, nogil=True)
    def _taylor4(m, h):
        d = m.shape[0]
        hm = h * m
        t = np.eye(d) + hm
        p = hm.copy()
        for i in range(2, 5):
            p = (p @ hm) / i
            t = t + p
        return t

    @njit(cache=True, nogil=True)
    def _psi(m, h):
        d = m.shape[0]
        hm = h * m
        s = np.eye(d)
        p = np.eye(d)
        for i in range(2, 5):
            p = (p @ hm) / i
            s = s + p
        return h * s

    @njit(cache=True, nogil=True)
    def _ctrl(p, b, lo, hi, theta_eff, contains_zero, u_out):
        """Bang-off-bang argmax; returns 1.0 if the control is on."""
        r = b.shape[1]
        d = b.shape[0]
        gain = 0.0
        for j in range(r):
            c = 0.0
            for i in range(d):
                c += b[i, j] * p[i]
            v_lo = c * lo[j]
            v_hi = c * hi[j]
            if v_hi > v_lo:
                best = v_hi
                uj = hi[j]
            else:
                best = v_lo
                uj = lo[j]
            if lo[j] <= 0.0 <= hi[j] and 0.0 >= best:
                best = 0.0
                uj = 0.0
            u_out[j] = uj
            gain += best
        if contains_zero:
            nonzero = False
            for j in range(r):
                if u_out[j] != 0.0:
                    nonzero = True
                    break
            if not (gain > theta_eff) or not nonzero:
                for j in range(r):
                    u_out[j] = 0.0
                return 0.0
            return 1.0
        for j in range(r):
            if u_out[j] != 0.0:
                return 1.0
        return 0.0

    @njit(cache=True, nogil=True)
    def _interval_kernel(
        a,
        at_neg,
        b,
        lo,
        hi,
        contains_zero,
        theta_eff,
        nodes,
        x_in,
        p_in,
        x0_in,
        locate,
        ts,
        xs,
        ps,
        x0s,
        us,
    ):
        d = a.shape[0]
        r = b.shape[1]
        n_nodes = nodes.shape[0]
        cap = ts.shape[0]
        h_full = nodes[1] - nodes[0]
        ex_full = _taylor4(a, h_full)
        fu_full = _psi(a, h_full) @ b
        ep_full = _taylor4(at_neg, h_full)

        x = x_in.copy()
        p = p_in.copy()
        x0v = x0_in
        ts[0] = nodes[0]
        for i in range(d):
            xs[0, i] = x[i]
            ps[0, i] = p[i]
        x0s[0] = x0v
        m = 1

        u = np.empty(r)
        u_new = np.empty(r)
        u_mid = np.empty(r)
        ind = _ctrl(p, b, lo, hi, theta_eff, contains_zero, u)

        for n in range(n_nodes - 1):
            t = ts[m - 1]
            t_next = nodes[n + 1]
            events = 0
            while True:
                h = t_next - t
                if abs(h - h_full) <= 1e-14 * h_full:
                    xn = ex_full @ x + fu_full @ u
                    pn = ep_full @ p
                else:
                    xn = _taylor4(a, h) @ x + (_psi(a, h) @ b) @ u
                    pn = _taylor4(at_neg, h) @ p
                ok = True
                for i in range(d):
                    if not (np.isfinite(xn[i]) and np.isfinite(pn[i])):
                        ok = False
                if not ok:
                    return -2
                ind_new = _ctrl(pn, b, lo, hi, theta_eff, contains_zero, u_new)
                same = True
                for j in range(r):
                    if u_new[j] != u[j]:
                        same = False
                        break
                if (not locate) or same or events >= 16:
                    x = xn
                    p = pn
                    x0v += h * ind
                    if m >= cap:
                        return -1
                    ts[m] = t_next
                    for i in range(d):
                        xs[m, i] = x[i]
                        ps[m, i] = p[i]
                    x0s[m] = x0v
                    for j in range(r):
                        us[m - 1, j] = u[j]
                    m += 1
                    for j in range(r):
                        u[j] = u_new[j]
                    ind = ind_new
                    break
                # bisect the flip instant, re-stepping from (t, x, p)
                lo_t = t
                hi_t = t_next
                for _ in range(52):
                    mid = 0.5 * (lo_t + hi_t)
                    if mid <= lo_t or mid >= hi_t:
                        break
                    pm = _taylor4(at_neg, mid - t) @ p
                    _ctrl(pm, b, lo, hi, theta_eff, contains_zero, u_mid)
                    same_mid = True
                    for j in range(r):
                        if u_mid[j] != u[j]:
                            same_mid = False
                            break
                    if same_mid:
                        lo_t = mid
                    else:
                        hi_t = mid
                dsw = hi_t - t
                events += 1
                if dsw > 1e-13 * h_full:
                    x = _taylor4(a, dsw) @ x + (_psi(a, dsw) @ b) @ u
                    p = _taylor4(at_neg, dsw) @ p
                    x0v += dsw * ind
                    if m >= cap:
                        return -1
                    ts[m] = hi_t
                    for i in range(d):
                        xs[m, i] = x[i]
                        ps[m, i] = p[i]
                    x0s[m] = x0v
                    for j in range(r):
                        us[m - 1, j] = u[j]
                    m += 1
                    t = hi_t
                ind = _ctrl(p, b, lo, hi, theta_eff, contains_zero, u)
                if t >= t_next:
                    break
        return m


def integrate_interval(problem, nodes, x0v, x, p0, p, prho, locate_switches):
    """Drive the kernel for one interval; mirrors the generic path's API."""
    a, b = problem.system.lti
    controls = problem.controls
    theta_eff = problem.eta * problem.objective.lam - p0
    cap = len(nodes) + 512
    d, r = a.shape[0], b.shape[1]
    ts = np.empty(cap)
    xs = np.empty((cap, d))
    ps = np.empty((cap, d))
    x0s = np.empty(cap)
    us = np.empty((cap - 1, r))
    m = _interval_kernel(
        a,
        -a.T.copy(),
        b,
        controls.lo,
        controls.hi,
        controls.contains_zero,
        theta_eff,
        np.asarray(nodes, dtype=float),
        np.asarray(x, dtype=float),
        np.asarray(p, dtype=float),
        float(x0v),
        locate_switches,
        ts,
        xs,
        ps,
        x0s,
        us,
    )
    if m == -2:
        from .integrate import IntegrationError

        raise IntegrationError("non-finite state/adjoint in fast path")
    if m < 0:
        raise RuntimeError("fast-path node capacity exceeded")
    xbar = np.concatenate((x0s[:m, None], xs[:m]), axis=1)
    rs = np.full(m, prho)
    return (
        ts[:m].copy(),
        xbar,
        ps[:m].copy(),
        rs,
        us[: m - 1].copy(),
        xs[m - 1].copy(),
        ps[m - 1].copy(),
        prho,
        float(x0s[m - 1]),
    )
