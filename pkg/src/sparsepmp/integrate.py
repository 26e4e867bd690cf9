"""
integrate.py
------------

Fixed-step integration of the coupled state/adjoint dynamics with the
control synthesized pointwise by Hamiltonian maximization.

Within each RK4 step the control is frozen at the step-start argmax; when
the argmax flips across a step, the switch instant is located by bisection
(re-stepping from the step start) and inserted as an extra node, so the
trajectory is O(h^4)-accurate on every smooth piece.  At each interior
instant t_k the costate discontinuity from the jump conditions is applied
and recorded; the state never jumps.

The activation-time state x0 integrates exactly per segment
(dx0/dt is 0 or 1 on a segment), and p0 is constant between jumps by
construction, not by quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .pmp import (
    AdjointState,
    JumpRecord,
    Multipliers,
    default_rule,
    hamiltonian,
    initial_costate,
    jump_residual_apply,
)
from .problem import IntermediatePoints, ProblemSpec, Process, sparse_state_rhs

__all__ = [
    "IntegrationGrid",
    "TrajectoryRecord",
    "IntegrationError",
    "rk4_step_augmented",
    "integrate_extremal",
    "refine_switch_times",
]

_BISECT_ITERS = 52  # halvings; locates switches to ~2^-52 of a step


class IntegrationError(RuntimeError):
    """Non-finite values or malformed time vectors during integration."""


@dataclass(frozen=True)
class IntegrationGrid:
    """Per-interval node times; first/last nodes are the interval ends."""

    nodes: tuple

    def __post_init__(self):
        for arr in self.nodes:
            if len(arr) < 2 or np.any(np.diff(arr) <= 0):
                raise IntegrationError("grid nodes must be strictly increasing")

    @staticmethod
    def uniform(times, nodes_per_interval) -> "IntegrationGrid":
        times = np.asarray(times, dtype=float)
        if np.any(np.diff(times) <= 0):
            raise IntegrationError("interval times must be strictly increasing")
        if np.isscalar(nodes_per_interval):
            nodes_per_interval = [int(nodes_per_interval)] * (len(times) - 1)
        segs = tuple(
            np.linspace(times[k], times[k + 1], int(n) + 1)
            for k, n in enumerate(nodes_per_interval)
        )
        return IntegrationGrid(nodes=segs)


@dataclass
class TrajectoryRecord:
    """Node-wise trajectory of (xbar, pbar) with per-segment controls.

    Arrays are stored per interval; the costate jump at t_k shows up as the
    difference between the last row of interval k and the first row of
    interval k+1 and must reproduce ``jumps[k-1]`` exactly.
    """

    times: list
    xbar: list
    p0: list
    p: list
    prho: list
    u: list
    jumps: list
    gamma0: IntermediatePoints

    @property
    def nu(self) -> int:
        return len(self.times)

    def adjoint_at(self, k: int, where: int) -> AdjointState:
        """Adjoint at interval k boundary; where = 0 (start) or -1 (end)."""
        return AdjointState(self.p0[k][where], self.p[k][where], self.prho[k][where])

    def final_adjoint(self) -> AdjointState:
        return self.adjoint_at(-1, -1)

    def boundary_states(self) -> np.ndarray:
        """Integrated xbar at (t_0, ..., t_nu), shape (nu+1, d+1)."""
        rows = [self.xbar[0][0]] + [x[-1] for x in self.xbar]
        return np.asarray(rows)

    def hamiltonian_segments(self, problem: ProblemSpec) -> list:
        """Per interval, H evaluated at each segment's left node with that
        segment's control."""
        out = []
        lam = problem.objective.lam
        for k in range(self.nu):
            t, xb, u = self.times[k], self.xbar[k], self.u[k]
            hs = np.empty(len(u))
            for n in range(len(u)):
                adj = AdjointState(self.p0[k][n], self.p[k][n], self.prho[k][n])
                hs[n] = hamiltonian(
                    adj, t[n], xb[n], u[n], problem.system, problem.eta, lam
                )
            out.append(hs)
        return out

    def boundary_hamiltonians(self, problem: ProblemSpec):
        """H at t_0 plus the (left, right) pairs at interior instants."""
        lam = problem.objective.lam
        sys_, eta = problem.system, problem.eta
        adj = self.adjoint_at(0, 0)
        h0 = hamiltonian(
            adj, self.times[0][0], self.xbar[0][0], self.u[0][0], sys_, eta, lam
        )
        pairs = []
        for k in range(self.nu - 1):
            tk = self.times[k][-1]
            x_k = self.xbar[k][-1]
            left = hamiltonian(
                self.adjoint_at(k, -1), tk, x_k, self.u[k][-1], sys_, eta, lam
            )
            right = hamiltonian(
                self.adjoint_at(k + 1, 0), tk, x_k, self.u[k + 1][0], sys_, eta, lam
            )
            pairs.append((left, right))
        return h0, pairs

    def switch_times(self, tol: float = 1e-9) -> np.ndarray:
        """Interior nodes where the segment control changes."""
        out = []
        for k in range(self.nu):
            u = self.u[k]
            for n in range(1, len(u)):
                if np.max(np.abs(u[n] - u[n - 1])) > tol:
                    out.append(self.times[k][n])
        return np.asarray(out)

    def to_process(self) -> Process:
        return Process(
            grids=[t.copy() for t in self.times],
            states=[x.copy() for x in self.xbar],
            controls=[u.copy() for u in self.u],
        )


def rk4_step_augmented(system, t, xbar, u, h) -> np.ndarray:
    """One classical RK4 step of the augmented state (x0 exactly)."""
    x = np.asarray(xbar, dtype=float)[1:]
    u = np.atleast_1d(u)
    f = system.rhs
    k1 = np.asarray(f(t, x, u), dtype=float)
    k2 = np.asarray(f(t + h / 2, x + h / 2 * k1, u), dtype=float)
    k3 = np.asarray(f(t + h / 2, x + h / 2 * k2, u), dtype=float)
    k4 = np.asarray(f(t + h, x + h * k3, u), dtype=float)
    xn = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return np.concatenate(([xbar[0] + h * sparse_state_rhs(u)], xn))


def _rk4_joint(system, t, x, p, prho, u, h):
    """RK4 step of (x, p, prho) with u frozen."""

    def deriv(tt, xx, pp):
        fx = np.asarray(system.rhs(tt, xx, u), dtype=float)
        jx = np.asarray(system.jac_state(tt, xx, u), dtype=float)
        jt = np.asarray(system.jac_time(tt, xx, u), dtype=float)
        return fx, -(jx.T @ pp), -float(jt @ pp)

    k1x, k1p, k1r = deriv(t, x, p)
    k2x, k2p, k2r = deriv(t + h / 2, x + h / 2 * k1x, p + h / 2 * k1p)
    k3x, k3p, k3r = deriv(t + h / 2, x + h / 2 * k2x, p + h / 2 * k2p)
    k4x, k4p, k4r = deriv(t + h, x + h * k3x, p + h * k3p)
    xn = x + h / 6 * (k1x + 2 * k2x + 2 * k3x + k4x)
    pn = p + h / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)
    rn = prho + h / 6 * (k1r + 2 * k2r + 2 * k3r + k4r)
    return xn, pn, rn


def _integrate_interval_generic(
    problem, rule, nodes, x0s, x, p0, p, prho, locate_switches
):
    """March one interval; returns per-node arrays (with event nodes)."""
    sys_ = problem.system
    eta, lam = problem.eta, problem.objective.lam
    ctrl = lambda tt, x0v, xv, pv, rv: rule(
        tt,
        np.concatenate(([x0v], xv)),
        AdjointState(p0, pv, rv),
        sys_,
        problem.controls,
        eta,
        lam,
    )

    ts = [nodes[0]]
    xs = [np.concatenate(([x0s], x))]
    ps = [p.copy()]
    rs = [prho]
    us = []

    t, x0v = nodes[0], x0s
    u = ctrl(t, x0v, x, p, prho)
    for n in range(len(nodes) - 1):
        t_next = nodes[n + 1]
        while True:
            h = t_next - t
            xn, pn, rn = _rk4_joint(sys_, t, x, p, prho, u, h)
            if not (np.all(np.isfinite(xn)) and np.all(np.isfinite(pn))):
                raise IntegrationError(f"non-finite state/adjoint near t={t!r}")
            u_next = ctrl(t_next, x0v + h * sparse_state_rhs(u), xn, pn, rn)
            if (
                not locate_switches
                or not rule.has_switches
                or np.array_equal(u_next, u)
            ):
                x, p, prho = xn, pn, rn
                x0v += h * sparse_state_rhs(u)
                ts.append(t_next)
                xs.append(np.concatenate(([x0v], x)))
                ps.append(p.copy())
                rs.append(prho)
                us.append(np.asarray(u, dtype=float))
                u = u_next
                break
            # control flips inside the step: bisect the flip instant
            lo_t, hi_t = t, t_next
            for _ in range(_BISECT_ITERS):
                mid = 0.5 * (lo_t + hi_t)
                if mid <= lo_t or mid >= hi_t:
                    break
                dm = mid - t
                xm, pm, rm = _rk4_joint(sys_, t, x, p, prho, u, dm)
                um = ctrl(mid, x0v + dm * sparse_state_rhs(u), xm, pm, rm)
                if np.array_equal(um, u):
                    lo_t = mid
                else:
                    hi_t = mid
            dsw = hi_t - t
            xn, pn, rn = _rk4_joint(sys_, t, x, p, prho, u, dsw)
            x0v += dsw * sparse_state_rhs(u)
            x, p, prho = xn, pn, rn
            ts.append(hi_t)
            xs.append(np.concatenate(([x0v], x)))
            ps.append(p.copy())
            rs.append(prho)
            us.append(np.asarray(u, dtype=float))
            t = hi_t
            u = ctrl(t, x0v, x, p, prho)
            if t >= t_next:
                break
        t = t_next
    return (
        np.asarray(ts),
        np.asarray(xs),
        np.asarray(ps),
        np.asarray(rs),
        np.asarray(us).reshape(len(us), -1),
        x,
        p,
        prho,
        x0v,
    )


def integrate_extremal(
    problem: ProblemSpec,
    zeta,
    grid: Optional[IntegrationGrid] = None,
    nodes_per_interval: int = 1000,
    locate_switches: bool = True,
    use_fast_path: bool = True,
) -> TrajectoryRecord:
    """Integrate the candidate extremal defined by shooting parameters.

    The initial costates come from the transversality rows evaluated at
    the candidate gamma; at every interior t_k the jump deltas are applied
    to the costates and recorded.  LTI systems with the affine
    bang-off-bang rule run through a fused compiled stepper when
    available; semantics are identical.
    """
    times = np.asarray(zeta.times, dtype=float)
    if np.any(np.diff(times) <= 0):
        raise IntegrationError("shooting times must be strictly increasing")
    if grid is None:
        grid = IntegrationGrid.uniform(times, nodes_per_interval)

    gamma0 = IntermediatePoints(times.copy(), np.asarray(zeta.states, dtype=float))
    mult = Multipliers(
        eta=problem.eta, alpha=zeta.alpha, beta=zeta.beta, slack=zeta.slack
    )
    rule = default_rule(problem)
    adj = initial_costate(problem, gamma0, mult)

    fast = None
    if (
        use_fast_path
        and problem.system.lti is not None
        and type(rule).__name__ == "AffineBoxRule"
        and problem.controls.kind == "box"
    ):
        from . import _fastpath

        fast = _fastpath if _fastpath.AVAILABLE else None

    xbar0 = np.asarray(gamma0.states[0], dtype=float)
    x = xbar0[1:].copy()
    x0v = float(xbar0[0])
    p0, p, prho = adj.p0, adj.p.copy(), adj.prho

    rec = TrajectoryRecord(
        times=[], xbar=[], p0=[], p=[], prho=[], u=[], jumps=[], gamma0=gamma0
    )
    for k in range(problem.nu):
        nodes = grid.nodes[k]
        if fast is not None:
            ts, xs, ps, rs, us, x, p, prho, x0v = fast.integrate_interval(
                problem, nodes, x0v, x, p0, p, prho, locate_switches
            )
        else:
            ts, xs, ps, rs, us, x, p, prho, x0v = _integrate_interval_generic(
                problem, rule, nodes, x0v, x, p0, p, prho, locate_switches
            )
        rec.times.append(ts)
        rec.xbar.append(xs)
        rec.p0.append(np.full(len(ts), p0))
        rec.p.append(ps)
        rec.prho.append(rs)
        rec.u.append(us)
        if k < problem.nu - 1:
            jump = jump_residual_apply(problem, k + 1, gamma0, mult)
            p0 += jump.dp0
            p = p + jump.dp
            prho += jump.dprho
            rec.jumps.append(jump)
    return rec


def simulate_process(
    problem: ProblemSpec,
    times,
    xbar0,
    control_fn,
    nodes_per_interval: int = 1000,
) -> Process:
    """Integrate the plant open-loop under u(t) = control_fn(t).

    The control is frozen per segment at its left node (piecewise-constant
    representation); x0 accumulates exactly.  Useful for building nominal
    trajectories and randomized admissible processes.
    """
    grid = IntegrationGrid.uniform(np.asarray(times, dtype=float), nodes_per_interval)
    xbar = np.asarray(xbar0, dtype=float).copy()
    grids, states, controls = [], [], []
    for nodes in grid.nodes:
        xs = [xbar.copy()]
        us = []
        for n in range(len(nodes) - 1):
            u = np.atleast_1d(np.asarray(control_fn(nodes[n]), dtype=float))
            xbar = rk4_step_augmented(
                problem.system, nodes[n], xbar, u, nodes[n + 1] - nodes[n]
            )
            xs.append(xbar.copy())
            us.append(u)
        grids.append(np.asarray(nodes))
        states.append(np.asarray(xs))
        controls.append(np.asarray(us).reshape(len(us), -1))
    return Process(grids=grids, states=states, controls=controls)


def refine_switch_times(rec: TrajectoryRecord, problem: ProblemSpec) -> TrajectoryRecord:
    """Insert nodes at control-switch instants of a stored record.

    For each adjacent segment pair whose controls differ, the switching
    function (difference of the Hamiltonian values of the two controls,
    with xbar and pbar linearly interpolated) is bisected to within
    1e-10 of the interval length and a node is inserted there.  Control
    values on either side are unchanged.  Records produced with in-loop
    switch location already have tight nodes and come back unchanged
    apart from the inserted duplicates being skipped.
    """
    lam, eta, sys_ = problem.objective.lam, problem.eta, problem.system
    out = TrajectoryRecord(
        times=[], xbar=[], p0=[], p=[], prho=[], u=[],
        jumps=list(rec.jumps), gamma0=rec.gamma0,
    )
    for k in range(rec.nu):
        t, xb, p0a, pa, ra, u = (
            list(rec.times[k]),
            [np.asarray(r) for r in rec.xbar[k]],
            list(rec.p0[k]),
            [np.asarray(r) for r in rec.p[k]],
            list(rec.prho[k]),
            [np.asarray(r) for r in rec.u[k]],
        )
        tol = 1e-10 * (t[-1] - t[0])
        n = 1
        while n < len(u):
            ua, ub = u[n - 1], u[n]
            if np.array_equal(ua, ub) or (t[n] - t[n - 1]) <= tol:
                n += 1
                continue

            def sigma(tt):
                w = (tt - t[n - 1]) / (t[n] - t[n - 1])
                xbv = (1 - w) * xb[n - 1] + w * xb[n]
                adj = AdjointState(
                    p0a[n - 1],
                    (1 - w) * pa[n - 1] + w * pa[n],
                    (1 - w) * ra[n - 1] + w * ra[n],
                )
                return hamiltonian(adj, tt, xbv, ub, sys_, eta, lam) - hamiltonian(
                    adj, tt, xbv, ua, sys_, eta, lam
                )

            lo_t, hi_t = t[n - 1], t[n]
            s_lo, s_hi = sigma(lo_t), sigma(hi_t)
            if s_lo * s_hi > 0:  # no sign change: leave untouched
                n += 1
                continue
            while hi_t - lo_t > tol:
                mid = 0.5 * (lo_t + hi_t)
                if sigma(mid) * s_lo <= 0:
                    hi_t = mid
                else:
                    lo_t = mid
            tsw = 0.5 * (lo_t + hi_t)
            if tsw - t[n - 1] > tol and t[n] - tsw > tol:
                w = (tsw - t[n - 1]) / (t[n] - t[n - 1])
                t.insert(n, tsw)
                xb.insert(n, (1 - w) * xb[n - 1] + w * xb[n])
                pa.insert(n, (1 - w) * pa[n - 1] + w * pa[n])
                ra.insert(n, (1 - w) * ra[n - 1] + w * ra[n])
                p0a.insert(n, p0a[n - 1])
                u.insert(n, ub.copy())  # the new control takes over at tsw
                n += 1
            n += 1
        out.times.append(np.asarray(t))
        out.xbar.append(np.asarray(xb))
        out.p0.append(np.asarray(p0a))
        out.p.append(np.asarray(pa))
        out.prho.append(np.asarray(ra))
        out.u.append(np.asarray(u).reshape(len(u), -1))
    return out
