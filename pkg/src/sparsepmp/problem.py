"""
problem.py
----------

Data model for a finite-horizon sparse optimal control problem with
equality/inequality constraints at intermediate time instants.

The controlled plant is

    dx/dt = f(t, x(t), u(t)),      u(t) in U,  t in [t_0, t_nu],

and the cost couples an activation-time (L0) term with an endpoint term,

    J = lam * integral of ind(u(t)) dt + ell(gamma),

where ``ind(u)`` is 1 when u is nonzero and 0 otherwise, and ``gamma`` is
the vector of intermediate points ((t_0, xbar(t_0)), ..., (t_nu, xbar(t_nu)))
built from the augmented state xbar = (x0, x).  The scalar x0 accumulates
control-active time (dx0/dt = ind(u), x0(t_0) = 0), so per-interval bounds
on the activation time become ordinary inequality constraints on xbar.

All constraint and cost callbacks are functions of gamma with gradients
with respect to every time t_k and every state slot xbar(t_k); the solver
consumes those gradients directly in the transversality and jump
conditions, so analytic gradients are strongly preferred (a finite
difference fallback is available and flagged).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "ControlSystem",
    "AdmissibleSet",
    "BoundaryFunction",
    "IntermediateSpec",
    "SparsityWindows",
    "ObjectiveSpec",
    "IntermediatePoints",
    "Process",
    "ProblemSpec",
    "FeasibilityReport",
    "sparse_state_rhs",
    "augment_problem",
    "check_feasible",
    "fd_gamma_gradients",
    "validate_gradients",
]


def sparse_state_rhs(u: np.ndarray) -> float:
    """Right-hand side of the activation-time state: 1 if u != 0, else 0.

    The comparison is exact (no epsilon): synthesized controls are exact
    zeros by construction, and values like 1e-300 count as "on".
    """
    u = np.asarray(u)
    return 0.0 if not np.any(u != 0.0) else 1.0


# ---------------------------------------------------------------------------
# Plant
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ControlSystem:
    """Controlled dynamics f(t, x, u) with the Jacobians the adjoint needs.

    Parameters
    ----------
    dim_state : int
        Dimension d of the state x.
    dim_control : int
        Dimension r of the control u.
    rhs : callable
        f(t, x, u) -> (d,) array.
    jac_state : callable
        df/dx(t, x, u) -> (d, d) array.
    jac_time : callable
        df/dt(t, x, u) -> (d,) array (zero for autonomous systems).
    lti : tuple, optional
        (A, B) when f = A x + B u with constant matrices.  Enables the
        exact fused integration fast path and the analytic bang-off-bang
        control rule.
    input_matrix : callable, optional
        B(t, x) -> (d, r) for control-affine dynamics f = f0(t, x) + B u.
        Derived automatically from ``lti``.
    """

    dim_state: int
    dim_control: int
    rhs: Callable[[float, np.ndarray, np.ndarray], np.ndarray]
    jac_state: Callable[[float, np.ndarray, np.ndarray], np.ndarray]
    jac_time: Callable[[float, np.ndarray, np.ndarray], np.ndarray]
    lti: Optional[tuple] = None
    input_matrix: Optional[Callable[[float, np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.lti is not None:
            a, b = self.lti
            a = np.atleast_2d(np.asarray(a, dtype=float))
            b = np.asarray(b, dtype=float).reshape(self.dim_state, self.dim_control)
            if a.shape != (self.dim_state, self.dim_state):
                raise ValueError("lti A matrix has wrong shape")
            object.__setattr__(self, "lti", (a, b))
            if self.input_matrix is None:
                object.__setattr__(self, "input_matrix", lambda t, x: b)

    @staticmethod
    def from_lti(a, b) -> "ControlSystem":
        """Build an autonomous linear system dx/dt = A x + B u."""
        a = np.atleast_2d(np.asarray(a, dtype=float))
        b = np.asarray(b, dtype=float)
        if b.ndim == 1:
            b = b[:, None]
        d = a.shape[0]
        zeros = np.zeros(d)
        return ControlSystem(
            dim_state=d,
            dim_control=b.shape[1],
            rhs=lambda t, x, u: a @ x + b @ u,
            jac_state=lambda t, x, u: a,
            jac_time=lambda t, x, u: zeros,
            lti=(a, b),
        )


@dataclass(frozen=True)
class AdmissibleSet:
    """Admissible control set U: a box [lo, hi] or a finite list of points."""

    kind: str  # "box" | "finite"
    lo: Optional[np.ndarray] = None
    hi: Optional[np.ndarray] = None
    points: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind == "box":
            lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
            hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
            if lo.shape != hi.shape or np.any(lo > hi):
                raise ValueError("box requires lo <= hi componentwise")
            object.__setattr__(self, "lo", lo)
            object.__setattr__(self, "hi", hi)
        elif self.kind == "finite":
            pts = np.atleast_2d(np.asarray(self.points, dtype=float))
            object.__setattr__(self, "points", pts)
        else:
            raise ValueError(f"unknown admissible set kind {self.kind!r}")

    @staticmethod
    def box(lo, hi) -> "AdmissibleSet":
        return AdmissibleSet(kind="box", lo=lo, hi=hi)

    @staticmethod
    def finite(points) -> "AdmissibleSet":
        return AdmissibleSet(kind="finite", points=points)

    @property
    def dim(self) -> int:
        return self.lo.shape[0] if self.kind == "box" else self.points.shape[1]

    @property
    def contains_zero(self) -> bool:
        if self.kind == "box":
            return bool(np.all(self.lo <= 0.0) and np.all(self.hi >= 0.0))
        return bool(np.any(np.all(self.points == 0.0, axis=1)))

    def contains(self, u: np.ndarray, tol: float = 0.0) -> bool:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if self.kind == "box":
            return bool(np.all(u >= self.lo - tol) and np.all(u <= self.hi + tol))
        return bool(np.any(np.max(np.abs(self.points - u), axis=1) <= tol))


# ---------------------------------------------------------------------------
# Intermediate points and boundary functions
# ---------------------------------------------------------------------------


@dataclass
class IntermediatePoints:
    """The vector gamma: times t_0..t_nu and the augmented states at them.

    ``states[k]`` is xbar(t_k) = (x0(t_k), x(t_k)) of length d+1.
    """

    times: np.ndarray  # (nu+1,)
    states: np.ndarray  # (nu+1, d+1)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.states.shape[0] != self.times.shape[0]:
            raise ValueError("gamma needs one state row per time instant")

    @property
    def nu(self) -> int:
        return len(self.times) - 1

    def copy(self) -> "IntermediatePoints":
        return IntermediatePoints(self.times.copy(), self.states.copy())


class BoundaryFunction:
    """Scalar function of gamma with gradients w.r.t. every t_k and xbar(t_k).

    Used both for constraints (h_j, g_i) and for the endpoint cost ell.
    When analytic gradients are omitted they are replaced by central finite
    differences and ``fd_fallback`` is set so reports can flag it.
    """

    def __init__(self, fun, grad_time=None, grad_state=None, name=""):
        self.fun = fun
        self.name = name
        self.fd_fallback = grad_time is None or grad_state is None
        self._grad_time = grad_time
        self._grad_state = grad_state

    def __call__(self, gamma: IntermediatePoints) -> float:
        return float(self.fun(gamma))

    def grad_time(self, gamma: IntermediatePoints) -> np.ndarray:
        """d/dt_k for k = 0..nu, shape (nu+1,)."""
        if self._grad_time is not None:
            return np.asarray(self._grad_time(gamma), dtype=float)
        return fd_gamma_gradients(self.fun, gamma)[0]

    def grad_state(self, gamma: IntermediatePoints) -> np.ndarray:
        """d/dxbar(t_k), shape (nu+1, d+1)."""
        if self._grad_state is not None:
            return np.asarray(self._grad_state(gamma), dtype=float)
        return fd_gamma_gradients(self.fun, gamma)[1]

    # -- constructors for the common constraint shapes ---------------------

    @staticmethod
    def fix_time(k: int, value: float, nu: int, name="") -> "BoundaryFunction":
        """h = t_k - value."""
        gt = np.zeros(nu + 1)
        gt[k] = 1.0

        def fun(g):
            return g.times[k] - value

        return BoundaryFunction(
            fun,
            grad_time=lambda g: gt,
            grad_state=lambda g: np.zeros_like(g.states),
            name=name or f"t[{k}]={value}",
        )

    @staticmethod
    def fix_state(k: int, idx: int, value: float, name="") -> "BoundaryFunction":
        """h = xbar(t_k)[idx] - value (idx indexes into (x0, x))."""

        def fun(g):
            return g.states[k, idx] - value

        def gs(g):
            out = np.zeros_like(g.states)
            out[k, idx] = 1.0
            return out

        return BoundaryFunction(
            fun,
            grad_time=lambda g: np.zeros(len(g.times)),
            grad_state=gs,
            name=name or f"xbar[{k}][{idx}]={value}",
        )

    @staticmethod
    def linear_state(k: int, weights, value: float, name="") -> "BoundaryFunction":
        """h = <weights, xbar(t_k)> - value, weights of length d+1."""
        w = np.asarray(weights, dtype=float)

        def fun(g):
            return float(w @ g.states[k]) - value

        def gs(g):
            out = np.zeros_like(g.states)
            out[k] = w
            return out

        return BoundaryFunction(
            fun,
            grad_time=lambda g: np.zeros(len(g.times)),
            grad_state=gs,
            name=name or f"<w, xbar[{k}]>={value}",
        )


def fd_gamma_gradients(fun, gamma: IntermediatePoints, step: float = 1e-6):
    """Central finite differences of a scalar gamma-function.

    Returns (grad_time (nu+1,), grad_state (nu+1, d+1)).
    """
    gt = np.zeros(len(gamma.times))
    gs = np.zeros_like(gamma.states)
    for k in range(len(gamma.times)):
        h = step * max(1.0, abs(gamma.times[k]))
        gp, gm = gamma.copy(), gamma.copy()
        gp.times[k] += h
        gm.times[k] -= h
        gt[k] = (fun(gp) - fun(gm)) / (2 * h)
        for i in range(gamma.states.shape[1]):
            h = step * max(1.0, abs(gamma.states[k, i]))
            gp, gm = gamma.copy(), gamma.copy()
            gp.states[k, i] += h
            gm.states[k, i] -= h
            gs[k, i] = (fun(gp) - fun(gm)) / (2 * h)
    return gt, gs


@dataclass
class IntermediateSpec:
    """Equality and inequality constraints over the vector gamma.

    Before augmentation this holds the q user equalities and m user
    inequalities; :func:`augment_problem` appends the sparse-state rows
    (making q+1 and m+nu of them).
    """

    nu: int
    equalities: list = field(default_factory=list)  # h_j(gamma) = 0
    inequalities: list = field(default_factory=list)  # g_i(gamma) <= 0
    augmented: bool = False

    @property
    def n_eq(self) -> int:
        return len(self.equalities)

    @property
    def n_ineq(self) -> int:
        return len(self.inequalities)

    def eq_values(self, gamma) -> np.ndarray:
        return np.array([h(gamma) for h in self.equalities])

    def ineq_values(self, gamma) -> np.ndarray:
        return np.array([g(gamma) for g in self.inequalities])


@dataclass(frozen=True)
class SparsityWindows:
    """Per-interval bounds (E1_k, E2_k) on the accumulated activation time.

    The constraint x0(t_k) in [E1_k, E2_k] is encoded as the quadratic
    (x0(t_k) - E1_k)(x0(t_k) - E2_k) <= 0.
    """

    lower: np.ndarray  # (nu,)
    upper: np.ndarray  # (nu,)

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape:
            raise ValueError("window bounds must have equal length")
        if np.any(lo < 0) or np.any(lo > hi):
            raise ValueError("windows require 0 <= E1_k <= E2_k")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def nu(self) -> int:
        return len(self.lower)

    @staticmethod
    def inactive(nu: int, horizon: float) -> "SparsityWindows":
        """Windows (0, horizon) that never bind."""
        return SparsityWindows(np.zeros(nu), np.full(nu, float(horizon)))


@dataclass
class ObjectiveSpec:
    """Cost weight lam > 0 and the endpoint cost ell(gamma) >= 0."""

    lam: float
    endpoint_cost: Optional[BoundaryFunction] = None

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("cost weight lam must be positive")

    def ell(self, gamma) -> float:
        return 0.0 if self.endpoint_cost is None else self.endpoint_cost(gamma)

    def ell_grad_time(self, gamma) -> np.ndarray:
        if self.endpoint_cost is None:
            return np.zeros(len(gamma.times))
        return self.endpoint_cost.grad_time(gamma)

    def ell_grad_state(self, gamma) -> np.ndarray:
        if self.endpoint_cost is None:
            return np.zeros_like(gamma.states)
        return self.endpoint_cost.grad_state(gamma)


# ---------------------------------------------------------------------------
# Augmentation
# ---------------------------------------------------------------------------


def augment_problem(
    sys: ControlSystem, windows: SparsityWindows, raw: IntermediateSpec
) -> IntermediateSpec:
    """Append the sparse-state rows to a raw constraint specification.

    Adds the equality h_{q+1}(gamma) = x0(t_0) and, for each interval
    k = 1..nu, the inequality
    g_{m+k}(gamma) = (x0(t_k) - E1_k)(x0(t_k) - E2_k),
    whose only nonzero state gradient is 2 x0(t_k) - E1_k - E2_k in the
    x0(t_k) slot.
    """
    if raw.augmented:
        raise ValueError("specification is already augmented")
    if windows.nu != raw.nu:
        raise ValueError(
            f"got {windows.nu} sparsity windows for {raw.nu} intervals"
        )
    nu = raw.nu
    eqs = list(raw.equalities)
    eqs.append(BoundaryFunction.fix_state(0, 0, 0.0, name="x0(t_0)=0"))
    ineqs = list(raw.inequalities)
    for k in range(1, nu + 1):
        e1 = float(windows.lower[k - 1])
        e2 = float(windows.upper[k - 1])

        def fun(g, k=k, e1=e1, e2=e2):
            s = g.states[k, 0]
            return (s - e1) * (s - e2)

        def gs(g, k=k, e1=e1, e2=e2):
            out = np.zeros_like(g.states)
            out[k, 0] = 2.0 * g.states[k, 0] - e1 - e2
            return out

        ineqs.append(
            BoundaryFunction(
                fun,
                grad_time=lambda g: np.zeros(len(g.times)),
                grad_state=gs,
                name=f"window[{k}]",
            )
        )
    return IntermediateSpec(nu=nu, equalities=eqs, inequalities=ineqs, augmented=True)


# ---------------------------------------------------------------------------
# Assembled problem
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProblemSpec:
    """One complete problem instance.

    Immutable after construction; every operation downstream is a pure
    function of its inputs, so instances are safe to share across
    concurrent evaluations.
    """

    name: str
    system: ControlSystem
    controls: AdmissibleSet
    objective: ObjectiveSpec
    constraints: IntermediateSpec  # augmented
    windows: SparsityWindows
    eta: int = 1
    candidate_rule: object = None  # pmp.CandidateRule; defaulted there

    def __post_init__(self):
        if not self.constraints.augmented:
            raise ValueError("ProblemSpec requires an augmented IntermediateSpec")
        if self.controls.dim != self.system.dim_control:
            raise ValueError("control set and system disagree on control dimension")
        if self.eta not in (0, 1):
            raise ValueError("eta must be 0 or 1")

    @property
    def nu(self) -> int:
        return self.constraints.nu

    @property
    def dim_state(self) -> int:
        return self.system.dim_state

    @property
    def dim_control(self) -> int:
        return self.system.dim_control

    @property
    def n_eq(self) -> int:
        return self.constraints.n_eq

    @property
    def n_ineq(self) -> int:
        return self.constraints.n_ineq

    @property
    def dim_zeta(self) -> int:
        nu, d = self.nu, self.dim_state
        return (nu + 1) + (d + 1) * (nu + 1) + self.n_eq + 2 * self.n_ineq

    def with_rule(self, rule) -> "ProblemSpec":
        return replace(self, candidate_rule=rule)


# ---------------------------------------------------------------------------
# Processes and feasibility
# ---------------------------------------------------------------------------


@dataclass
class Process:
    """A state/control path on per-interval grids plus its gamma vector.

    ``grids[k]`` are the node times of interval k (first = t_{k-1}, last =
    t_k), ``states[k]`` the xbar values at those nodes, ``controls[k]`` the
    piecewise-constant control on each segment (one row fewer than nodes).
    """

    grids: list  # of (n_k,) arrays
    states: list  # of (n_k, d+1) arrays
    controls: list  # of (n_k-1, r) arrays

    @property
    def nu(self) -> int:
        return len(self.grids)

    @property
    def times(self) -> np.ndarray:
        return np.array([g[0] for g in self.grids] + [self.grids[-1][-1]])

    def gamma(self) -> IntermediatePoints:
        states = [s[0] for s in self.states] + [self.states[-1][-1]]
        return IntermediatePoints(self.times, np.array(states))

    def activation_time(self) -> float:
        """Lebesgue measure of {t : u(t) != 0}, exact for this grid."""
        total = 0.0
        for grid, u in zip(self.grids, self.controls):
            seg = np.diff(grid)
            on = np.array([sparse_state_rhs(row) for row in u])
            total += float(seg @ on)
        return total

    def cost(self, problem: ProblemSpec) -> float:
        return problem.objective.lam * self.activation_time() + problem.objective.ell(
            self.gamma()
        )


@dataclass
class FeasibilityReport:
    """Outcome of check_feasible; empty ``violations`` means feasible."""

    violations: list = field(default_factory=list)
    dynamics_defect: float = 0.0
    malformed: bool = False

    @property
    def feasible(self) -> bool:
        return not self.violations and not self.malformed

    def add(self, kind, detail, magnitude):
        self.violations.append((kind, detail, float(magnitude)))


def check_feasible(problem: ProblemSpec, proc: Process, tol: float = 1e-3) -> FeasibilityReport:
    """Check a process against dynamics, constraints, and control bounds.

    The dynamics check re-takes one RK4 step per segment with the stored
    control and compares against the stored next state; the x0 component
    is checked against its exact per-segment increment.
    """
    from .integrate import rk4_step_augmented

    rep = FeasibilityReport()
    if len(proc.grids) != problem.nu:
        rep.malformed = True
        rep.add("structure", f"expected {problem.nu} intervals", len(proc.grids))
        return rep
    for k, grid in enumerate(proc.grids):
        if len(grid) < 2:
            rep.malformed = True
            rep.add("grid", f"interval {k} has fewer than 2 nodes", len(grid))
    if rep.malformed:
        return rep

    worst = 0.0
    for k in range(proc.nu):
        grid, xs, us = proc.grids[k], proc.states[k], proc.controls[k]
        for n in range(len(grid) - 1):
            h = grid[n + 1] - grid[n]
            pred = rk4_step_augmented(problem.system, grid[n], xs[n], us[n], h)
            defect = float(np.max(np.abs(pred - xs[n + 1])))
            worst = max(worst, defect)
            if defect > tol:
                rep.add("dynamics", (k, n), defect)
        for n, u in enumerate(us):
            if not problem.controls.contains(u, tol=0.0):
                rep.add("control", (k, n), float(np.max(np.abs(u))))
    rep.dynamics_defect = worst

    gamma = proc.gamma()
    for j, hfun in enumerate(problem.constraints.equalities):
        v = hfun(gamma)
        if abs(v) > tol:
            rep.add("equality", getattr(hfun, "name", j), abs(v))
    for i, gfun in enumerate(problem.constraints.inequalities):
        v = gfun(gamma)
        if v > tol:
            rep.add("inequality", getattr(gfun, "name", i), v)
    return rep


# ---------------------------------------------------------------------------
# Gradient validation
# ---------------------------------------------------------------------------


def validate_gradients(
    problem: ProblemSpec,
    base_gamma: IntermediatePoints,
    rng: np.random.Generator,
    n_points: int = 20,
    tol: float = 1e-5,
    scale: float = 0.1,
) -> list:
    """Cross-check analytic gamma-gradients against finite differences.

    Samples random perturbations of ``base_gamma`` and compares each
    constraint's and the endpoint cost's gradients with central
    differences at relative tolerance ``tol``.  Returns a list of
    (name, kind, error) for failures; empty means all pass.
    """
    funs = list(problem.constraints.equalities) + list(problem.constraints.inequalities)
    if problem.objective.endpoint_cost is not None:
        funs.append(problem.objective.endpoint_cost)
    failures = []
    for _ in range(n_points):
        g = base_gamma.copy()
        g.times = g.times + scale * rng.standard_normal(g.times.shape)
        g.states = g.states + scale * rng.standard_normal(g.states.shape)
        for fn in funs:
            gt_fd, gs_fd = fd_gamma_gradients(fn.fun, g)
            gt, gs = fn.grad_time(g), fn.grad_state(g)
            et = np.max(np.abs(gt - gt_fd)) / max(1.0, np.max(np.abs(gt_fd)))
            es = np.max(np.abs(gs - gs_fd)) / max(1.0, np.max(np.abs(gs_fd)))
            if et > tol:
                failures.append((fn.name, "time", float(et)))
            if es > tol:
                failures.append((fn.name, "state", float(es)))
    return failures


def system_jacobian_check(
    sys: ControlSystem,
    rng: np.random.Generator,
    sample_state,
    sample_control,
    n_points: int = 20,
    tol: float = 1e-5,
) -> float:
    """Max relative error of jac_state against central differences of rhs."""
    worst = 0.0
    for _ in range(n_points):
        t = float(rng.uniform(0.0, 10.0))
        x = np.asarray(sample_state(rng), dtype=float)
        u = np.asarray(sample_control(rng), dtype=float)
        jac = np.asarray(sys.jac_state(t, x, u), dtype=float)
        fd = np.zeros_like(jac)
        for i in range(sys.dim_state):
            h = 1e-6 * max(1.0, abs(x[i]))
            xp, xm = x.copy(), x.copy()
            xp[i] += h
            xm[i] -= h
            fd[:, i] = (np.asarray(sys.rhs(t, xp, u)) - np.asarray(sys.rhs(t, xm, u))) / (2 * h)
        err = np.max(np.abs(jac - fd)) / max(1.0, np.max(np.abs(fd)))
        worst = max(worst, float(err))
    return worst
