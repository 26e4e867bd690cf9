"""
shooting.py
-----------

The unknown vector zeta and the shooting residual Phi(zeta).

zeta packs, in order: the time instants (nu+1), the candidate augmented
states at those instants ((nu+1)(d+1), row-major), the equality
multipliers alpha (q+1), the inequality multipliers beta (m+nu), and the
squared slack theta (m+nu).

Phi stacks, in order: the state-matching defects xbar(t_k, zeta) - s_k for
k = 1..nu; the terminal transversality rows (d+2); the equality values
h(gamma0); the slack-completed inequalities g_i(gamma0) + theta_i^2; the
complementary-slackness products beta_i g_i(gamma0); and the Hamiltonian
rows (H at t_0, then the continuity differences at interior instants).
The two stacks have equal length, so the root-finding problem is square.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .integrate import IntegrationGrid, TrajectoryRecord, integrate_extremal
from .pmp import Multipliers, terminal_residual
from .problem import IntermediatePoints, ProblemSpec

__all__ = [
    "ShootingParams",
    "ResidualVector",
    "zeta_dims",
    "pack",
    "unpack",
    "eval_phi",
    "jacobian_fd",
    "residual_to_zeta_layout",
]


@dataclass
class ShootingParams:
    """Structured view of the unknown vector zeta."""

    times: np.ndarray  # (nu+1,)
    states: np.ndarray  # (nu+1, d+1)
    alpha: np.ndarray  # (q+1,)
    beta: np.ndarray  # (m+nu,)
    slack: np.ndarray  # (m+nu,)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        self.alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        self.beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        self.slack = np.atleast_1d(np.asarray(self.slack, dtype=float))

    def gamma(self) -> IntermediatePoints:
        return IntermediatePoints(self.times.copy(), self.states.copy())

    def copy(self) -> "ShootingParams":
        return ShootingParams(
            self.times.copy(),
            self.states.copy(),
            self.alpha.copy(),
            self.beta.copy(),
            self.slack.copy(),
        )


def zeta_dims(problem: ProblemSpec) -> dict:
    """Block sizes and offsets of the packed zeta vector."""
    nu, d = problem.nu, problem.dim_state
    sizes = {
        "times": nu + 1,
        "states": (nu + 1) * (d + 1),
        "alpha": problem.n_eq,
        "beta": problem.n_ineq,
        "slack": problem.n_ineq,
    }
    offsets, pos = {}, 0
    for key, n in sizes.items():
        offsets[key] = (pos, pos + n)
        pos += n
    return {"sizes": sizes, "offsets": offsets, "total": pos}


def pack(zeta: ShootingParams) -> np.ndarray:
    return np.concatenate(
        (
            zeta.times,
            zeta.states.ravel(),
            zeta.alpha,
            zeta.beta,
            zeta.slack,
        )
    )


def unpack(vec: np.ndarray, problem: ProblemSpec) -> ShootingParams:
    dims = zeta_dims(problem)
    vec = np.asarray(vec, dtype=float)
    if vec.shape != (dims["total"],):
        raise ValueError(
            f"zeta vector has length {vec.shape}, expected ({dims['total']},)"
        )
    off = dims["offsets"]
    nu, d = problem.nu, problem.dim_state
    return ShootingParams(
        times=vec[slice(*off["times"])].copy(),
        states=vec[slice(*off["states"])].reshape(nu + 1, d + 1).copy(),
        alpha=vec[slice(*off["alpha"])].copy(),
        beta=vec[slice(*off["beta"])].copy(),
        slack=vec[slice(*off["slack"])].copy(),
    )


@dataclass
class ResidualVector:
    """Phi(zeta) partitioned by condition family."""

    state_matching: np.ndarray  # (nu, d+1)
    terminal: np.ndarray  # (d+2,)
    equalities: np.ndarray  # (q+1,)
    inequalities: np.ndarray  # (m+nu,) g_i + theta_i^2
    slackness: np.ndarray  # (m+nu,) beta_i g_i
    hamiltonian: np.ndarray  # (nu,) H(t_0), then continuity differences

    def pack(self) -> np.ndarray:
        return np.concatenate(
            (
                self.state_matching.ravel(),
                self.terminal,
                self.equalities,
                self.inequalities,
                self.slackness,
                self.hamiltonian,
            )
        )

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.pack()))

    def block_norms(self) -> dict:
        return {
            "state_matching": float(np.linalg.norm(self.state_matching)),
            "terminal": float(np.linalg.norm(self.terminal)),
            "equalities": float(np.linalg.norm(self.equalities)),
            "inequalities": float(np.linalg.norm(self.inequalities)),
            "slackness": float(np.linalg.norm(self.slackness)),
            "hamiltonian": float(np.linalg.norm(self.hamiltonian)),
        }


def eval_phi(
    problem: ProblemSpec,
    zeta: ShootingParams,
    grid: Optional[IntegrationGrid] = None,
    nodes_per_interval: int = 1000,
    locate_switches: bool = True,
    return_record: bool = False,
):
    """Evaluate the shooting residual at zeta.

    Derives the initial costates from transversality, integrates the
    candidate extremal forward (applying the interior costate jumps), and
    fills the residual blocks.  Deterministic: identical inputs give
    bitwise identical residuals.
    """
    rec = integrate_extremal(
        problem,
        zeta,
        grid=grid,
        nodes_per_interval=nodes_per_interval,
        locate_switches=locate_switches,
    )
    rv = residual_from_record(problem, zeta, rec)
    if return_record:
        return rv, rec
    return rv


def residual_from_record(
    problem: ProblemSpec, zeta: ShootingParams, rec: TrajectoryRecord
) -> ResidualVector:
    gamma0 = rec.gamma0
    mult = Multipliers(
        eta=problem.eta, alpha=zeta.alpha, beta=zeta.beta, slack=zeta.slack
    )

    boundary = rec.boundary_states()
    matching = boundary[1:] - zeta.states[1:]

    term_rows = terminal_residual(problem, gamma0, mult, rec.final_adjoint())

    eqs = problem.constraints.eq_values(gamma0)
    gvals = problem.constraints.ineq_values(gamma0)
    ineqs = gvals + zeta.slack**2
    slackness = zeta.beta * gvals

    h0, pairs = rec.boundary_hamiltonians(problem)
    ham = np.concatenate(([h0], [right - left for (left, right) in pairs]))

    return ResidualVector(
        state_matching=matching,
        terminal=term_rows,
        equalities=eqs,
        inequalities=ineqs,
        slackness=slackness,
        hamiltonian=ham,
    )


def jacobian_fd(
    problem: ProblemSpec,
    zeta: ShootingParams,
    scheme: str = "central2",
    rel_step: float = 1e-6,
    nodes_per_interval: int = 1000,
    locate_switches: bool = True,
    threads: Optional[int] = None,
) -> np.ndarray:
    """Finite-difference Jacobian of the packed residual w.r.t. zeta.

    Column j perturbs zeta_j by h_j = rel_step * max(1, |zeta_j|);
    ``central2`` uses the two-point stencil, ``central4`` the four-point
    one.  Columns are independent and evaluated in parallel when
    ``threads`` (or SPARSEPMP_THREADS) exceeds one.
    """
    import os

    base = pack(zeta)
    n = len(base)

    def phi_at(vec):
        return eval_phi(
            problem,
            unpack(vec, problem),
            nodes_per_interval=nodes_per_interval,
            locate_switches=locate_switches,
        ).pack()

    def column(j):
        h = rel_step * max(1.0, abs(base[j]))
        if scheme == "central2":
            vp, vm = base.copy(), base.copy()
            vp[j] += h
            vm[j] -= h
            col = (phi_at(vp) - phi_at(vm)) / (2 * h)
        elif scheme == "central4":
            vs = []
            for mult_ in (2, 1, -1, -2):
                v = base.copy()
                v[j] += mult_ * h
                vs.append(phi_at(v))
            col = (-vs[0] + 8 * vs[1] - 8 * vs[2] + vs[3]) / (12 * h)
        else:
            raise ValueError(f"unknown finite-difference scheme {scheme!r}")
        if not np.all(np.isfinite(col)):
            raise FloatingPointError(f"non-finite Jacobian column {j}")
        return col

    if threads is None:
        threads = int(os.environ.get("SPARSEPMP_THREADS", "1"))
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as ex:
            cols = list(ex.map(column, range(n)))
    else:
        cols = [column(j) for j in range(n)]
    return np.stack(cols, axis=1)


def residual_to_zeta_layout(
    rv: ResidualVector, problem: ProblemSpec, block_signs: Optional[dict] = None
) -> np.ndarray:
    """Reshape the residual into zeta coordinates for the SA update.

    Fixed block correspondence (each condition drives the unknown it
    classically determines):

    - t_0 <- H(t_0) row; interior t_k <- Hamiltonian continuity rows;
      t_nu <- terminal prho row,
    - s_0 <- terminal (p0, p) rows; s_k (k >= 1) <- matching block k,
    - alpha <- equality rows, beta <- slackness rows,
      theta <- slack-completed inequality rows.

    ``block_signs`` optionally flips the sign of named blocks
    ("times", "states", "alpha", "beta", "slack"); this is the
    sign-corrected update variant and is off (all +1) by default.
    """
    nu = problem.nu
    times_part = np.concatenate((rv.hamiltonian, [rv.terminal[-1]]))
    states_part = np.concatenate((rv.terminal[:-1], rv.state_matching.ravel()))
    parts = {
        "times": times_part,
        "states": states_part,
        "alpha": rv.equalities,
        "beta": rv.slackness,
        "slack": rv.inequalities,
    }
    if block_signs:
        for key, sign in block_signs.items():
            parts[key] = sign * parts[key]
    return np.concatenate(
        (parts["times"], parts["states"], parts["alpha"], parts["beta"], parts["slack"])
    )
