"""
pmp.py
------

Pointwise evaluation of the first-order necessary conditions: the
Hamiltonian, the adjoint right-hand sides, control synthesis by
Hamiltonian maximization, and the transversality / jump relations that
tie the costates to the constraint gradients at the boundary and
intermediate instants.

Costate layout: pbar = (p0, p, prho) where p0 is conjugate to the
activation-time state x0 (constant between jumps), p in R^d to the main
state, and prho to time (it absorbs the free-time conditions).

Hamiltonian:

    H(pbar, t, xbar, u) = p0 * ind(u) + <p, f(t, x, u)> + prho
                          - eta * lam * ind(u).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .problem import (
    AdmissibleSet,
    ControlSystem,
    IntermediatePoints,
    ProblemSpec,
    sparse_state_rhs,
)

__all__ = [
    "AdjointState",
    "Multipliers",
    "JumpRecord",
    "hamiltonian",
    "adjoint_rhs",
    "CandidateRule",
    "AffineBoxRule",
    "GridRule",
    "FiniteSetRule",
    "default_rule",
    "synthesize_control",
    "grid_argmax_oracle",
    "boundary_gradient",
    "initial_costate",
    "terminal_residual",
    "jump_residual_apply",
]


@dataclass
class AdjointState:
    """Costate triple (p0, p, prho) at one instant."""

    p0: float
    p: np.ndarray
    prho: float

    def __post_init__(self):
        self.p = np.atleast_1d(np.asarray(self.p, dtype=float))
        self.p0 = float(self.p0)
        self.prho = float(self.prho)


@dataclass
class Multipliers:
    """Multipliers (eta, alpha, beta) plus the squared slack theta."""

    eta: int
    alpha: np.ndarray
    beta: np.ndarray
    slack: np.ndarray

    def __post_init__(self):
        self.alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        self.beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        self.slack = np.atleast_1d(np.asarray(self.slack, dtype=float))

    def nontrivial(self, pbar_norm: float, tol: float = 0.0) -> bool:
        total = (
            abs(self.eta)
            + pbar_norm
            + float(np.sum(np.abs(self.alpha)))
            + float(np.sum(np.abs(self.beta)))
        )
        return total > tol


@dataclass
class JumpRecord:
    """Applied costate discontinuity at interior instant t_k."""

    k: int
    dp0: float
    dp: np.ndarray
    dprho: float

    def as_vector(self) -> np.ndarray:
        return np.concatenate(([self.dp0], self.dp, [self.dprho]))


def hamiltonian(
    adj: AdjointState,
    t: float,
    xbar: np.ndarray,
    u: np.ndarray,
    system: ControlSystem,
    eta: int,
    lam: float,
) -> float:
    """H = p0*ind(u) + <p, f(t,x,u)> + prho - eta*lam*ind(u)."""
    x = np.asarray(xbar, dtype=float)[1:]
    ind = sparse_state_rhs(u)
    f = np.asarray(system.rhs(t, x, np.atleast_1d(u)), dtype=float)
    return adj.p0 * ind + float(adj.p @ f) + adj.prho - eta * lam * ind


def adjoint_rhs(
    adj: AdjointState,
    t: float,
    x: np.ndarray,
    u: np.ndarray,
    system: ControlSystem,
):
    """Adjoint derivatives (dp0/dt, dp/dt, dprho/dt).

    dp0/dt = 0, dp/dt = -(df/dx)^T p, dprho/dt = -(df/dt)^T p.
    """
    jx = np.asarray(system.jac_state(t, x, u), dtype=float)
    jt = np.asarray(system.jac_time(t, x, u), dtype=float)
    return 0.0, -(jx.T @ adj.p), -float(jt @ adj.p)


# ---------------------------------------------------------------------------
# Control synthesis
# ---------------------------------------------------------------------------


class CandidateRule:
    """Strategy for maximizing H over u in U at one instant.

    ``has_switches`` tells the integrator whether the synthesized control
    is piecewise constant with genuine jumps (worth locating by bisection)
    or varies continuously.
    """

    has_switches = True

    def __call__(self, t, xbar, adj, system, controls, eta, lam) -> np.ndarray:
        raise NotImplementedError


class AffineBoxRule(CandidateRule):
    """Exact bang-off-bang rule for control-affine dynamics on a box.

    With f = f0 + B u the on/off comparison reduces to
    gain = sum_j max(lo_j c_j, hi_j c_j, 0) with c = B^T p: the control is
    "on" iff gain exceeds eta*lam - p0 strictly; ties prefer u = 0, and a
    zero coefficient switches its component off.
    """

    def __call__(self, t, xbar, adj, system, controls, eta, lam):
        b = system.input_matrix(t, np.asarray(xbar)[1:])
        c = b.T @ adj.p
        lo, hi = controls.lo, controls.hi
        u = np.empty_like(lo)
        gain = 0.0
        for j in range(len(lo)):
            v_lo, v_hi = c[j] * lo[j], c[j] * hi[j]
            zero_ok = lo[j] <= 0.0 <= hi[j]
            best, uj = (v_hi, hi[j]) if v_hi > v_lo else (v_lo, lo[j])
            if zero_ok and 0.0 >= best:  # ties prefer the zero component
                best, uj = 0.0, 0.0
            u[j] = uj
            gain += best
        if not controls.contains_zero:
            return u  # indicator is constant on U: the facet max is exact
        if gain > eta * lam - adj.p0 and np.any(u != 0.0):
            return u
        return np.zeros_like(lo)


class GridRule(CandidateRule):
    """Grid argmax fallback.

    For one channel (or with ``separable=True``, meaning H splits
    additively across channels apart from the indicator coupling) each
    axis is maximized on its own grid and the assembled control is
    compared against u = 0.  Non-separable multichannel boxes use the
    full product grid, which is only sensible for small point counts.
    """

    def __init__(self, points_per_axis: int = 201, separable: bool = False):
        self.points_per_axis = points_per_axis
        self.separable = separable

    def __call__(self, t, xbar, adj, system, controls, eta, lam):
        cands = _grid_candidates(controls, self.points_per_axis, self.separable)
        return _argmax_over(cands, t, xbar, adj, system, controls, eta, lam)


class FiniteSetRule(CandidateRule):
    """Exhaustive maximization over a finite admissible set."""

    def __call__(self, t, xbar, adj, system, controls, eta, lam):
        return _argmax_over(controls.points, t, xbar, adj, system, controls, eta, lam)


def _grid_candidates(controls: AdmissibleSet, n: int, separable: bool) -> np.ndarray:
    lo, hi = controls.lo, controls.hi
    r = len(lo)
    axes = []
    for j in range(r):
        ax = np.linspace(lo[j], hi[j], n)
        if lo[j] < 0.0 < hi[j]:
            ax = np.union1d(ax, [0.0])
        axes.append(ax)
    if r == 1:
        return axes[0][:, None]
    if separable:
        # handled per-axis by the caller through _argmax_over on stacked
        # candidates: vary one axis at a time around the per-axis optimum
        raise RuntimeError("separable grids are resolved in _argmax_over")
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _argmax_over(cands, t, xbar, adj, system, controls, eta, lam):
    best_u, best_v = None, -np.inf
    zero = np.zeros(controls.dim)
    rows = list(np.atleast_2d(cands))
    if controls.contains_zero:
        rows.append(zero)
    for u in rows:
        v = hamiltonian(adj, t, xbar, u, system, eta, lam)
        if v > best_v + 1e-15 or (
            best_u is not None
            and abs(v - best_v) <= 1e-15
            and _prefer(u, best_u)
        ):
            best_u, best_v = np.asarray(u, dtype=float), v
    return best_u


def _prefer(u_new, u_old) -> bool:
    """Tie-break: u = 0 first, then lexicographically smallest."""
    new_zero = not np.any(u_new != 0.0)
    old_zero = not np.any(u_old != 0.0)
    if new_zero != old_zero:
        return new_zero
    return tuple(u_new) < tuple(u_old)


def default_rule(problem: ProblemSpec) -> CandidateRule:
    if problem.candidate_rule is not None:
        return problem.candidate_rule
    if problem.controls.kind == "finite":
        return FiniteSetRule()
    if problem.system.input_matrix is not None:
        return AffineBoxRule()
    return GridRule()


def synthesize_control(
    adj: AdjointState,
    t: float,
    xbar: np.ndarray,
    controls: AdmissibleSet,
    system: ControlSystem,
    eta: int,
    lam: float,
    rule: Optional[CandidateRule] = None,
) -> np.ndarray:
    """Return a maximizer of H over the admissible set.

    Exact zero is always a candidate when 0 in U; ties break toward 0
    (sparsity preference), then lexicographically.
    """
    if rule is None:
        rule = AffineBoxRule() if system.input_matrix is not None else GridRule()
    return rule(t, np.asarray(xbar, dtype=float), adj, system, controls, eta, lam)


def grid_argmax_oracle(
    adj,
    t,
    xbar,
    controls,
    system,
    eta,
    lam,
    points_per_axis: int = 2001,
) -> float:
    """Best Hamiltonian value found by brute force; the test oracle.

    Box sets use a per-axis grid of ``points_per_axis`` points plus exact
    zero (channels combined per-axis with the others at their own best,
    which is exact for additively separable Hamiltonians and for single
    channels); finite sets are enumerated.
    """
    if controls.kind == "finite":
        vals = [
            hamiltonian(adj, t, xbar, u, system, eta, lam) for u in controls.points
        ]
        return float(np.max(vals))
    lo, hi = controls.lo, controls.hi
    r = len(lo)
    best_rows = []
    for j in range(r):
        ax = np.linspace(lo[j], hi[j], points_per_axis)
        if lo[j] < 0.0 < hi[j]:
            ax = np.union1d(ax, [0.0])
        vals = []
        for a in ax:
            u = np.zeros(r)
            u[j] = a
            # score each axis with the other channels parked at zero;
            # the indicator is handled by the joint comparison below
            vals.append(hamiltonian(adj, t, xbar, u, system, eta, lam))
        best_rows.append(ax[int(np.argmax(vals))])
    u_joint = np.array(best_rows)
    cands = [u_joint]
    if controls.contains_zero:
        cands.append(np.zeros(r))
    # also try each single-channel best alone (relevant when activating a
    # second channel costs more than it gains)
    for j in range(r):
        u = np.zeros(r)
        u[j] = best_rows[j]
        cands.append(u)
    return float(
        np.max([hamiltonian(adj, t, xbar, u, system, eta, lam) for u in cands])
    )


# ---------------------------------------------------------------------------
# Transversality and jumps
# ---------------------------------------------------------------------------


def boundary_gradient(
    problem: ProblemSpec,
    k: int,
    gamma: IntermediatePoints,
    mult: Multipliers,
):
    """Gradients at instant k of eta*ell + <alpha, h> + <beta, g>.

    Returns (d/dxbar(t_k) of length d+1, d/dt_k scalar).  This single
    expression generates the initial costates, the terminal residual
    rows, and the interior jump sizes.
    """
    obj = problem.objective
    gx = mult.eta * obj.ell_grad_state(gamma)[k]
    gt = mult.eta * obj.ell_grad_time(gamma)[k]
    for a, hfun in zip(mult.alpha, problem.constraints.equalities):
        if a != 0.0:
            gx = gx + a * hfun.grad_state(gamma)[k]
            gt = gt + a * hfun.grad_time(gamma)[k]
    for b, gfun in zip(mult.beta, problem.constraints.inequalities):
        if b != 0.0:
            gx = gx + b * gfun.grad_state(gamma)[k]
            gt = gt + b * gfun.grad_time(gamma)[k]
    return np.asarray(gx, dtype=float), float(gt)


def initial_costate(
    problem: ProblemSpec, gamma: IntermediatePoints, mult: Multipliers
) -> AdjointState:
    """Costates at t_0 from the transversality rows.

    (p0, p)(t_0) = d/dxbar(t_0) [eta*ell + <alpha,h> + <beta,g>], and
    prho(t_0) likewise from the t_0 derivative.
    """
    gx, gt = boundary_gradient(problem, 0, gamma, mult)
    return AdjointState(p0=gx[0], p=gx[1:], prho=gt)


def terminal_residual(
    problem: ProblemSpec,
    gamma: IntermediatePoints,
    mult: Multipliers,
    adj_final: AdjointState,
) -> np.ndarray:
    """Terminal transversality rows in "= 0" form, length d+2.

    Rows: p0(t_nu) + dL/dx0(t_nu); p(t_nu) + dL/dx(t_nu);
    prho(t_nu) + dL/dt_nu, with L = eta*ell + <alpha,h> + <beta,g>.
    """
    gx, gt = boundary_gradient(problem, problem.nu, gamma, mult)
    return np.concatenate(
        (
            [adj_final.p0 + gx[0]],
            adj_final.p + gx[1:],
            [adj_final.prho + gt],
        )
    )


def jump_residual_apply(
    problem: ProblemSpec,
    k: int,
    gamma: IntermediatePoints,
    mult: Multipliers,
) -> JumpRecord:
    """Costate discontinuity at interior instant t_k (1 <= k <= nu-1).

    Delta pbar(t_k) = pbar(t_k+) - pbar(t_k-) equals the gamma-gradient of
    eta*ell + <alpha,h> + <beta,g> at slot k; in particular the x0
    component reduces to beta_{m+k} (2 x0(t_k) - E1_k - E2_k).
    """
    if not 1 <= k <= problem.nu - 1:
        raise IndexError(f"interior instant index {k} out of range")
    gx, gt = boundary_gradient(problem, k, gamma, mult)
    return JumpRecord(k=k, dp0=float(gx[0]), dp=gx[1:].copy(), dprho=gt)
