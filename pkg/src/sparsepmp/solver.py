"""
solver.py
---------

Hybrid root finder for the shooting residual: a stochastic-approximation
exploration phase

    z_{k+1} = z_k + gamma_k (Phi(z_k) + M_{k+1}),

run until ||Phi|| falls below a switch radius r, followed by damped
Newton iterations

    z_{m+1} = z_m - alpha_m G^{-1} Phi(z_m)

to the convergence tolerance eps.  If the Newton iterates stop showing
signs of convergence (windowed averages of ||Phi|| and of the step length
both fail to decrease), the solver reverts to the SA phase from the best
iterate seen so far with the switch radius halved.

The SA phase can optionally flip the sign of the whole update
(``phi_sign``) or of individual residual blocks (``block_signs``), the
sign-corrected variant; the verbatim update is the default.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .integrate import IntegrationError

__all__ = [
    "StepSchedule",
    "NoiseSource",
    "SolverConfig",
    "SolverTrace",
    "SolveResult",
    "sa_step",
    "newton_step",
    "solve_root",
    "solve",
]


@dataclass(frozen=True)
class StepSchedule:
    """Step-size sequence gamma_k for the SA phase.

    kinds: ``power`` gamma_k = c / k**a; ``rational`` gamma_k = c / (1 + a k);
    ``root`` gamma_k = c / (1 + k**a).
    """

    kind: str
    c: float
    a: float

    def gamma(self, k: int) -> float:
        if self.kind == "power":
            return self.c / k**self.a
        if self.kind == "rational":
            return self.c / (1.0 + self.a * k)
        if self.kind == "root":
            return self.c / (1.0 + k**self.a)
        raise ValueError(f"unknown schedule kind {self.kind!r}")

    def robbins_monro_ok(self) -> bool:
        """True when sum(gamma) diverges and sum(gamma^2) converges."""
        if self.kind == "power":
            return 0.5 < self.a <= 1.0
        if self.kind == "rational":
            return self.a > 0.0
        if self.kind == "root":
            # gamma ~ c/k^a: square-summable only for a > 1/2
            return 0.5 < self.a <= 1.0
        return False

    @staticmethod
    def parse(text: str) -> "StepSchedule":
        """Parse 'kind:c:a', e.g. 'root:1e-2:0.2'."""
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError("schedule must be kind:c:a")
        return StepSchedule(kind=parts[0], c=float(parts[1]), a=float(parts[2]))

    def __str__(self) -> str:
        return f"{self.kind}:{self.c:g}:{self.a:g}"


class NoiseSource:
    """Seeded zero-mean bounded-variance perturbations, one draw per step.

    ``sigma`` is a per-coordinate scale vector; ``uniform`` draws from
    [-sigma, sigma], ``normal`` from N(0, sigma^2) truncated at 6 sigma.
    """

    def __init__(self, sigma, seed: int = 0, distribution: str = "uniform"):
        self.sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
        self.distribution = distribution
        self.seed = int(seed)
        self.rng = np.random.Generator(np.random.PCG64(self.seed))

    def draw(self) -> np.ndarray:
        if self.distribution == "uniform":
            return self.rng.uniform(-1.0, 1.0, size=self.sigma.shape) * self.sigma
        if self.distribution == "normal":
            z = np.clip(self.rng.standard_normal(self.sigma.shape), -6.0, 6.0)
            return z * self.sigma
        raise ValueError(f"unknown noise distribution {self.distribution!r}")


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances, budgets, and the SA/NR plumbing knobs.

    ``sa_mode`` selects how the residual is reshaped into iterate
    coordinates for the SA update: "verbatim" uses the fixed block
    correspondence (optionally sign-flipped per block via
    ``block_signs``); "assignment" pairs each residual row with the
    unknown it affects most strongly (a signed permutation computed from
    one finite-difference Jacobian and refreshed every
    ``correspondence_refresh`` accepted steps).  The assignment mode is
    the sign-corrected descent variant: the raw update converges only
    when the residual field happens to point toward the root, which
    shooting systems generally do not.
    """

    eps: float = 1e-3
    switch_radius: float = 0.1
    max_sa_iters: int = 20000
    max_nr_iters: int = 200
    max_total_iters: int = 50000
    schedule: StepSchedule = StepSchedule("root", 1e-2, 0.2)
    noise_scale: float = 0.1
    noise_distribution: str = "uniform"
    phi_sign: int = 1
    block_signs: Optional[dict] = None
    sa_mode: str = "verbatim"
    correspondence_refresh: int = 250
    damping_halvings: int = 8
    divergence_window: int = 20
    radius_shrink: float = 2.0
    max_reversions: int = 10
    seed: int = 0
    grid_nodes: int = 1000
    fd_scheme: str = "central2"
    fd_rel_step: float = 1e-6
    newton_cond_limit: float = 1e12

    def __post_init__(self):
        if not (0.0 < self.eps < self.switch_radius):
            raise ValueError("require 0 < eps < switch_radius")
        if self.phi_sign not in (1, -1):
            raise ValueError("phi_sign must be +1 or -1")
        if self.sa_mode not in ("verbatim", "assignment"):
            raise ValueError("sa_mode must be 'verbatim' or 'assignment'")


@dataclass
class SolverTrace:
    """Per-iteration record: phase tag, ||Phi||, step size, wall time."""

    seed: int
    rows: list = field(default_factory=list)  # (iter, phase, phi_norm, step, wall)
    events: list = field(default_factory=list)

    def log(self, it, phase, phi_norm, step, wall):
        self.rows.append((int(it), phase, float(phi_norm), float(step), float(wall)))

    def note(self, it, message):
        self.events.append((int(it), message))

    def phase_counts(self) -> dict:
        out: dict = {}
        for row in self.rows:
            out[row[1]] = out.get(row[1], 0) + 1
        return out

    def iterations_to(self, threshold: float, phase: Optional[str] = None):
        """First iteration index at which ||Phi|| <= threshold."""
        for it, ph, nphi, _, _ in self.rows:
            if phase is not None and ph != phase:
                continue
            if nphi <= threshold:
                return it
        return None

    def phi_norms(self) -> np.ndarray:
        return np.array([r[2] for r in self.rows])


@dataclass
class SolveResult:
    converged: bool
    z: np.ndarray
    phi_norm: float
    trace: SolverTrace
    reversions: int
    reason: str
    certificate: dict = field(default_factory=dict)
    zeta: object = None  # structured ShootingParams for OCP solves
    residual: object = None


def sa_step(z, phi_mapped, gamma_k, noise) -> np.ndarray:
    """One stochastic-approximation update z + gamma (Phi + M)."""
    return z + gamma_k * (phi_mapped + noise)


def newton_step(z, phi, jac, alpha_m) -> np.ndarray:
    """Damped Newton update z - alpha G^{-1} Phi via dense LU."""
    delta = np.linalg.solve(jac, phi)
    return z - alpha_m * delta


def assignment_correspondence(jac: np.ndarray) -> np.ndarray:
    """Signed permutation pairing residual rows with iterate slots.

    Solves the assignment problem maximizing the product of |J| entries
    (each residual row goes to the unknown it moves most), then orients
    each pair so the paired diagonal is negative.  Shooting Jacobians are
    dominated by unit entries (identity-like constraint rows, matching
    defects), so near a root the permuted field behaves like -identity.
    """
    from scipy.optimize import linear_sum_assignment

    n = jac.shape[0]
    cost = -np.log(np.abs(jac) + 1e-12)
    rows, cols = linear_sum_assignment(cost)
    perm = np.zeros((n, n))
    for i, j in zip(rows, cols):
        perm[j, i] = -np.sign(jac[i, j]) if jac[i, j] != 0 else 1.0
    return perm


def _fd_jacobian(phi_fn, z, scheme="central2", rel_step=1e-6):
    """Generic finite-difference Jacobian for plain root problems."""
    z = np.asarray(z, dtype=float)
    phi0 = np.atleast_1d(phi_fn(z))
    n, m = len(z), len(phi0)
    jac = np.empty((m, n))
    for j in range(n):
        h = rel_step * max(1.0, abs(z[j]))
        if scheme == "central2":
            zp, zm = z.copy(), z.copy()
            zp[j] += h
            zm[j] -= h
            jac[:, j] = (phi_fn(zp) - phi_fn(zm)) / (2 * h)
        elif scheme == "central4":
            vals = []
            for mult in (2, 1, -1, -2):
                v = z.copy()
                v[j] += mult * h
                vals.append(np.atleast_1d(phi_fn(v)))
            jac[:, j] = (-vals[0] + 8 * vals[1] - 8 * vals[2] + vals[3]) / (12 * h)
        else:
            raise ValueError(f"unknown finite-difference scheme {scheme!r}")
    return jac


def solve_root(
    phi_fn: Callable[[np.ndarray], np.ndarray],
    z0,
    cfg: SolverConfig,
    sa_map: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    jac_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    noise_sigma=None,
    certify: Optional[Callable[[np.ndarray], dict]] = None,
) -> SolveResult:
    """Run the hybrid SA + damped-Newton iteration on a square system.

    ``sa_map`` reshapes the residual into iterate coordinates for the SA
    update (identity for plain root problems); ``certify`` runs extra
    acceptance checks on a candidate zero and returns a dict with key
    "ok"; failing certificates mark the zero as spurious.
    """
    z = np.atleast_1d(np.asarray(z0, dtype=float)).copy()
    if sa_map is None:
        sa_map = lambda v: v
    if jac_fn is None:
        jac_fn = lambda zz: _fd_jacobian(phi_fn, zz, cfg.fd_scheme, cfg.fd_rel_step)
    if noise_sigma is None:
        noise_sigma = cfg.noise_scale * np.maximum(1.0, np.abs(z))
    noise = NoiseSource(
        noise_sigma, seed=cfg.seed, distribution=cfg.noise_distribution
    )

    trace = SolverTrace(seed=cfg.seed)
    t_start = time.perf_counter()

    phi = np.atleast_1d(phi_fn(z))
    nphi = float(np.linalg.norm(phi))
    best_z, best_phi, best_nphi = z.copy(), phi.copy(), nphi

    r = cfg.switch_radius
    total = 0
    sa_k = 0
    reversions = 0

    def finish(converged, reason):
        cert = {}
        if converged and certify is not None:
            cert = certify(best_z if reason == "best" else z)
            if not cert.get("ok", True):
                trace.note(total, f"spurious root rejected: {cert}")
                return SolveResult(
                    False, z, nphi, trace, reversions, "spurious-root", cert
                )
        return SolveResult(
            converged,
            z if converged else best_z,
            nphi if converged else best_nphi,
            trace,
            reversions,
            reason,
            cert,
        )

    use_assignment = cfg.sa_mode == "assignment"
    perm = None

    def refresh_perm(at_z):
        nonlocal perm
        try:
            perm = assignment_correspondence(jac_fn(at_z))
        except (IntegrationError, FloatingPointError, np.linalg.LinAlgError):
            trace.note(total, "correspondence refresh failed; keeping previous")

    def mapped(phi_vec):
        if use_assignment:
            return cfg.phi_sign * (perm @ phi_vec)
        return sa_map(phi_vec)

    while total < cfg.max_total_iters:
        # --- phase I: stochastic approximation ---------------------------
        sa_budget = 0
        if use_assignment and nphi > r:
            refresh_perm(z)
        while nphi > r and total < cfg.max_total_iters and sa_budget < cfg.max_sa_iters:
            sa_k += 1
            sa_budget += 1
            total += 1
            if use_assignment and sa_k % cfg.correspondence_refresh == 0:
                refresh_perm(best_z)
            gamma = cfg.schedule.gamma(sa_k)
            step_scale = 1.0
            for attempt in range(8):
                cand = sa_step(z, mapped(phi), gamma * step_scale, noise.draw())
                try:
                    phi_c = np.atleast_1d(phi_fn(cand))
                except (IntegrationError, FloatingPointError, np.linalg.LinAlgError):
                    step_scale *= 0.5
                    continue
                if np.all(np.isfinite(phi_c)):
                    z, phi = cand, phi_c
                    nphi = float(np.linalg.norm(phi))
                    break
                step_scale *= 0.5
            else:
                trace.note(total, "sa step rejected 8 times; keeping iterate")
            trace.log(total, "sa", nphi, gamma, time.perf_counter() - t_start)
            if nphi < best_nphi:
                best_z, best_phi, best_nphi = z.copy(), phi.copy(), nphi
        if nphi > r:
            return finish(False, "sa budget exhausted")

        # --- phase II: damped Newton -------------------------------------
        window = deque(maxlen=2 * cfg.divergence_window)
        diverged = False
        while total < cfg.max_total_iters:
            total += 1
            try:
                jac = jac_fn(z)
                cond = np.linalg.cond(jac)
            except (IntegrationError, FloatingPointError, np.linalg.LinAlgError):
                trace.note(total, "jacobian evaluation failed")
                diverged = True
                break
            if not np.isfinite(cond) or cond > cfg.newton_cond_limit:
                trace.note(total, f"ill-conditioned jacobian (cond={cond:.3e})")
                diverged = True
                break
            delta = np.linalg.solve(jac, phi)
            alpha = 1.0
            accepted = None
            fallback = None
            for _ in range(cfg.damping_halvings + 1):
                cand = z - alpha * delta
                try:
                    phi_c = np.atleast_1d(phi_fn(cand))
                except (IntegrationError, FloatingPointError, np.linalg.LinAlgError):
                    alpha *= 0.5
                    continue
                if not np.all(np.isfinite(phi_c)):
                    alpha *= 0.5
                    continue
                nphi_c = float(np.linalg.norm(phi_c))
                if fallback is None:
                    fallback = (cand, phi_c, nphi_c, alpha)
                if nphi_c < nphi:
                    accepted = (cand, phi_c, nphi_c, alpha)
                    break
                alpha *= 0.5
            if accepted is None and fallback is None:
                trace.note(total, "newton step unevaluable at all dampings")
                diverged = True
                break
            cand, phi_c, nphi_c, alpha = accepted or fallback
            step_len = float(np.linalg.norm(z - cand))
            z, phi, nphi = cand, phi_c, nphi_c
            trace.log(total, "nr", nphi, alpha, time.perf_counter() - t_start)
            if nphi < best_nphi:
                best_z, best_phi, best_nphi = z.copy(), phi.copy(), nphi
            if nphi <= cfg.eps:
                return finish(True, "converged")
            window.append((nphi, step_len))
            w = cfg.divergence_window
            if len(window) == 2 * w:
                last = np.array(list(window)[w:])
                prev = np.array(list(window)[:w])
                if last[:, 0].mean() >= prev[:, 0].mean() and last[:, 1].mean() >= prev[
                    :, 1
                ].mean():
                    trace.note(total, "no signs of convergence; reverting to SA")
                    diverged = True
                    break

        if not diverged and total >= cfg.max_total_iters:
            break
        # --- reversion ----------------------------------------------------
        reversions += 1
        if reversions > cfg.max_reversions:
            return finish(False, "reversion limit reached")
        z, phi, nphi = best_z.copy(), best_phi.copy(), best_nphi
        r = r / cfg.radius_shrink
        trace.note(total, f"reverted to best iterate; switch radius now {r:g}")
        if r <= cfg.eps:
            r = cfg.eps * 1.5
    return finish(False, "iteration budget exhausted")


def solve(problem, zeta0, cfg: SolverConfig) -> SolveResult:
    """Hybrid solve of the shooting system of a ProblemSpec.

    On success the returned zero satisfies the certificate checks
    (nonnegative inequality multipliers, strictly increasing times);
    zeros violating them are reported as spurious and rejected.
    """
    from .shooting import (
        eval_phi,
        jacobian_fd,
        pack,
        residual_to_zeta_layout,
        unpack,
        zeta_dims,
    )

    z0 = pack(zeta0) if not isinstance(zeta0, np.ndarray) else np.asarray(zeta0)

    def phi_fn(zvec):
        rv = eval_phi(
            problem, unpack(zvec, problem), nodes_per_interval=cfg.grid_nodes
        )
        return rv.pack()

    def sa_map(phi_vec):
        rv = _rv_from_packed(problem, phi_vec)
        return cfg.phi_sign * residual_to_zeta_layout(rv, problem, cfg.block_signs)

    def jac_fn(zvec):
        return jacobian_fd(
            problem,
            unpack(zvec, problem),
            scheme=cfg.fd_scheme,
            rel_step=cfg.fd_rel_step,
            nodes_per_interval=cfg.grid_nodes,
        )

    def certify(zvec):
        zeta = unpack(zvec, problem)
        beta_ok = bool(np.all(zeta.beta >= -1e-6))
        times_ok = bool(np.all(np.diff(zeta.times) > 0))
        return {"ok": beta_ok and times_ok, "beta_ok": beta_ok, "times_ok": times_ok}

    # per-block noise scales: 0.1 * characteristic scale of each block
    dims = zeta_dims(problem)
    sigma = np.empty(dims["total"])
    for key, (lo, hi) in dims["offsets"].items():
        blk = z0[lo:hi]
        sigma[lo:hi] = cfg.noise_scale * max(1.0, float(np.max(np.abs(blk), initial=0.0)))

    result = solve_root(
        phi_fn,
        z0,
        cfg,
        sa_map=sa_map,
        jac_fn=jac_fn,
        noise_sigma=sigma,
        certify=certify,
    )
    result.zeta = unpack(result.z, problem)
    try:
        result.residual = _rv_from_packed(problem, phi_fn(result.z))
    except IntegrationError:
        result.residual = None
    return result


def _rv_from_packed(problem, phi_vec):
    """Rebuild the block view of a packed residual vector."""
    from .shooting import ResidualVector

    nu, d = problem.nu, problem.dim_state
    n_eq, n_in = problem.n_eq, problem.n_ineq
    sizes = [nu * (d + 1), d + 2, n_eq, n_in, n_in, nu]
    parts = []
    pos = 0
    for s in sizes:
        parts.append(np.asarray(phi_vec[pos : pos + s]))
        pos += s
    return ResidualVector(
        state_matching=parts[0].reshape(nu, d + 1),
        terminal=parts[1],
        equalities=parts[2],
        inequalities=parts[3],
        slackness=parts[4],
        hamiltonian=parts[5],
    )
