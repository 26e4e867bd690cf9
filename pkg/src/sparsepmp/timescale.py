"""
timescale.py
------------

Forward and backward transformations between the original time domain and
per-interval scaled coordinates: each interval [t_{k-1}, t_k] maps onto
[0, 1] through d(rho_k)/d(tau) = z_k with rho_k(0) = t_{k-1},
rho_k(1) = t_k, states and controls carried along as
y_k(tau) = xbar(rho_k(tau)), v_k(tau) = u(rho_k(tau)).

Used as a verification oracle: the transformation preserves the cost and
the intermediate-point vector, and the backward map undoes the forward
one.  The solver itself shoots in the original domain.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .problem import IntermediatePoints, ProblemSpec, Process, sparse_state_rhs

__all__ = [
    "ScaledProcess",
    "StitchedView",
    "forward_map_F",
    "backward_map_G",
    "build_stitched",
    "transformed_cost",
    "cost_equivalence_check",
]


@dataclass
class ScaledProcess:
    """Per-interval scaled coordinates on tau in [0, 1].

    ``rho[k]`` holds the time-map values at the tau nodes, ``z[k]`` the
    per-segment scaling control (positive), ``y[k]`` the transformed
    states, ``v[k]`` the transformed controls.
    """

    taus: list
    rho: list
    z: list
    y: list
    v: list

    @property
    def nu(self) -> int:
        return len(self.rho)

    def boundary_times(self) -> np.ndarray:
        return np.array([r[0] for r in self.rho] + [self.rho[-1][-1]])

    def gamma(self) -> IntermediatePoints:
        states = [y[0] for y in self.y] + [self.y[-1][-1]]
        return IntermediatePoints(self.boundary_times(), np.array(states))

    def check_stitching(self, tol: float = 1e-9) -> bool:
        for k in range(self.nu - 1):
            if abs(self.rho[k + 1][0] - self.rho[k][-1]) > tol:
                return False
            if np.max(np.abs(self.y[k + 1][0] - self.y[k][-1])) > tol:
                return False
        return True


def forward_map_F(proc: Process, z: Optional[list] = None) -> ScaledProcess:
    """Map a process into scaled coordinates.

    With the default constant choice z_k = |Delta_k| the tau nodes are the
    rescaled time nodes and the mapping is exact on the grid.  A custom
    ``z`` gives per-interval per-segment positive values on a uniform tau
    grid; its integral over [0,1] must equal the interval length (the
    boundary conditions pin rho at both ends).
    """
    taus, rhos, zs, ys, vs = [], [], [], [], []
    for k in range(proc.nu):
        grid = proc.grids[k]
        t0, t1 = grid[0], grid[-1]
        delta = t1 - t0
        if z is None:
            tau = (grid - t0) / delta
            tau[0], tau[-1] = 0.0, 1.0
            zk = np.full(len(grid) - 1, delta)
            rho = grid.copy()
            yk = proc.states[k].copy()
            vk = proc.controls[k].copy()
        else:
            zk = np.asarray(z[k], dtype=float)
            if np.any(zk <= 0):
                raise ValueError("scaling control z must be positive")
            n = len(zk)
            tau = np.linspace(0.0, 1.0, n + 1)
            rho = t0 + np.concatenate(([0.0], np.cumsum(zk) / n))
            if abs(rho[-1] - t1) > 1e-9 * max(1.0, abs(delta)):
                raise ValueError(
                    "integral of z over [0,1] must equal the interval length"
                )
            rho[-1] = t1
            yk = _interp_rows(rho, grid, proc.states[k])
            mid = 0.5 * (rho[:-1] + rho[1:])
            vk = _segment_lookup(mid, grid, proc.controls[k])
        taus.append(tau)
        rhos.append(rho)
        zs.append(zk)
        ys.append(yk)
        vs.append(vk)
    return ScaledProcess(taus=taus, rho=rhos, z=zs, y=ys, v=vs)


def backward_map_G(sp: ScaledProcess) -> Process:
    """Reconstruct the original-domain process from scaled coordinates.

    Interval boundaries are read off the rho values; the state/control
    paths return on the grid t = rho_k(tau) (rho is piecewise linear and
    strictly increasing under piecewise-constant z, so its inverse is the
    monotone linear interpolant).
    """
    grids, states, controls = [], [], []
    for k in range(sp.nu):
        rho = np.asarray(sp.rho[k], dtype=float)
        if np.any(np.diff(rho) <= 0):
            raise ValueError("rho must be strictly increasing to invert")
        grids.append(rho.copy())
        states.append(np.asarray(sp.y[k]).copy())
        controls.append(np.asarray(sp.v[k]).copy())
    return Process(grids=grids, states=states, controls=controls)


@dataclass
class StitchedView:
    """Concatenated coordinates on s in [0, nu]: P(s), Y(s), V(s).

    P is continuous and strictly increasing; ``sigma`` is its inverse.
    For constant z_k = |Delta_k|, sigma(t) = k-1 + (t - t_{k-1})/|Delta_k|
    exactly.
    """

    s: np.ndarray
    p: np.ndarray
    y: np.ndarray
    v: np.ndarray  # per segment

    def sigma(self, t) -> np.ndarray:
        return np.interp(t, self.p, self.s)

    def state_at(self, t) -> np.ndarray:
        s = self.sigma(t)
        out = np.empty((np.size(s), self.y.shape[1]))
        for i in range(self.y.shape[1]):
            out[:, i] = np.interp(s, self.s, self.y[:, i])
        return out[0] if np.isscalar(t) else out


def build_stitched(sp: ScaledProcess) -> StitchedView:
    s_parts, p_parts, y_parts, v_parts = [], [], [], []
    for k in range(sp.nu):
        tau = np.asarray(sp.taus[k])
        s = (k) + tau  # interval k occupies [k, k+1] in 0-based stitching
        if k > 0:
            s_parts.append(s[1:])
            p_parts.append(sp.rho[k][1:])
            y_parts.append(sp.y[k][1:])
        else:
            s_parts.append(s)
            p_parts.append(sp.rho[k])
            y_parts.append(sp.y[k])
        v_parts.append(sp.v[k])
    return StitchedView(
        s=np.concatenate(s_parts),
        p=np.concatenate(p_parts),
        y=np.concatenate(y_parts, axis=0),
        v=np.concatenate(v_parts, axis=0),
    )


def transformed_cost(problem: ProblemSpec, sp: ScaledProcess) -> float:
    """Cost in scaled coordinates: lam * sum_k int ind(v_k) z_k dtau + ell."""
    total = 0.0
    for k in range(sp.nu):
        dtau = np.diff(sp.taus[k])
        on = np.array([sparse_state_rhs(row) for row in sp.v[k]])
        total += float(np.sum(on * sp.z[k] * dtau))
    return problem.objective.lam * total + problem.objective.ell(sp.gamma())


def cost_equivalence_check(
    problem: ProblemSpec, proc: Process, z: Optional[list] = None
) -> float:
    """|J_scaled(F(proc)) - J(proc)|; the equivalence oracle."""
    sp = forward_map_F(proc, z=z)
    return abs(transformed_cost(problem, sp) - proc.cost(problem))


def _interp_rows(t_new, t_old, rows):
    rows = np.asarray(rows)
    out = np.empty((len(t_new), rows.shape[1]))
    for i in range(rows.shape[1]):
        out[:, i] = np.interp(t_new, t_old, rows[:, i])
    return out


def _segment_lookup(t_query, grid, controls):
    idx = np.clip(np.searchsorted(grid, t_query, side="right") - 1, 0, len(controls) - 1)
    return np.asarray(controls)[idx]
