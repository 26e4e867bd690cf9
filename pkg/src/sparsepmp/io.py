"""
io.py
-----

Plot-ready run artifacts: trajectory and trace tables as CSV, summaries
and configs as JSON.  Floats are written with 17 significant digits so a
round-trip reproduces the binary values exactly.

A minimal JSON problem schema for linear-dynamics instances is also
loadable (matrices A and B, a control box, fixed times/states, activation
windows, and an optional linear endpoint cost); nonlinear dynamics need
code-level problem authoring.
"""

from __future__ import annotations

import json
import os
from typing import Optional

import numpy as np

from .integrate import TrajectoryRecord
from .pmp import AdjointState, hamiltonian
from .problem import (
    AdmissibleSet,
    BoundaryFunction,
    ControlSystem,
    IntermediatePoints,
    IntermediateSpec,
    ObjectiveSpec,
    ProblemSpec,
    SparsityWindows,
    augment_problem,
)
from .shooting import ShootingParams
from .solver import SolverConfig, SolverTrace, StepSchedule

__all__ = [
    "write_trajectory_csv",
    "load_trajectory_csv",
    "write_trace_csv",
    "write_summary_json",
    "load_summary_json",
    "zeta_to_jsonable",
    "zeta_from_jsonable",
    "load_problem_json",
]

_FMT = "%.17g"


def _fmt(x) -> str:
    return _FMT % float(x)


def write_trajectory_csv(path, problem: ProblemSpec, rec: TrajectoryRecord) -> None:
    """One row per node: interval, t, x0.., p0.., p_rho, u.., H.

    Interior instants appear twice (end of one interval, start of the
    next) so the costate jump is visible in the table.  The control
    column at a node holds the control of the segment starting there
    (repeating the last segment at interval ends).
    """
    d, r = problem.dim_state, problem.dim_control
    lam = problem.objective.lam
    header = (
        ["interval", "t", "x0"]
        + [f"x_{i+1}" for i in range(d)]
        + ["p0"]
        + [f"p_{i+1}" for i in range(d)]
        + ["p_rho"]
        + [f"u_{j+1}" for j in range(r)]
        + ["H"]
    )
    lines = [",".join(header)]
    for k in range(rec.nu):
        t, xb, u = rec.times[k], rec.xbar[k], rec.u[k]
        for n in range(len(t)):
            useg = u[min(n, len(u) - 1)]
            adj = AdjointState(rec.p0[k][n], rec.p[k][n], rec.prho[k][n])
            h_val = hamiltonian(
                adj, t[n], xb[n], useg, problem.system, problem.eta, lam
            )
            row = (
                [str(k), _fmt(t[n])]
                + [_fmt(v) for v in xb[n]]
                + [_fmt(rec.p0[k][n])]
                + [_fmt(v) for v in rec.p[k][n]]
                + [_fmt(rec.prho[k][n])]
                + [_fmt(v) for v in useg]
                + [_fmt(h_val)]
            )
            lines.append(",".join(row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_trajectory_csv(path, problem: ProblemSpec, gamma0: IntermediatePoints) -> TrajectoryRecord:
    """Rebuild a TrajectoryRecord from its CSV table."""
    d = problem.dim_state
    data = np.genfromtxt(path, delimiter=",", names=True)
    data = np.atleast_1d(data)
    rec = TrajectoryRecord(
        times=[], xbar=[], p0=[], p=[], prho=[], u=[], jumps=[], gamma0=gamma0
    )
    names = data.dtype.names
    xcols = ["x0"] + [f"x_{i+1}" for i in range(d)]
    pcols = [f"p_{i+1}" for i in range(d)]
    ucols = [f"u_{j+1}" for j in range(problem.dim_control)]
    for k in sorted(set(int(v) for v in data["interval"])):
        sel = data[data["interval"] == k]
        rec.times.append(np.asarray(sel["t"], dtype=float))
        rec.xbar.append(np.stack([sel[c] for c in xcols], axis=1).astype(float))
        rec.p0.append(np.asarray(sel["p0"], dtype=float))
        rec.p.append(np.stack([sel[c] for c in pcols], axis=1).astype(float))
        rec.prho.append(np.asarray(sel["p_rho"], dtype=float))
        u_nodes = np.stack([sel[c] for c in ucols], axis=1).astype(float)
        rec.u.append(u_nodes[:-1])
    # re-derive the jump records from the stored multipliers is the
    # verifier's job; the loaded record carries only the trajectory
    return rec


def write_trace_csv(path, trace: SolverTrace) -> None:
    lines = ["iter,phase,phi_norm,step,wall_time"]
    for it, phase, nphi, step, wall in trace.rows:
        lines.append(f"{it},{phase},{_fmt(nphi)},{_fmt(step)},{_fmt(wall)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def zeta_to_jsonable(zeta: ShootingParams) -> dict:
    return {
        "times": [float(v) for v in zeta.times],
        "states": [[float(v) for v in row] for row in zeta.states],
        "alpha": [float(v) for v in zeta.alpha],
        "beta": [float(v) for v in zeta.beta],
        "slack": [float(v) for v in zeta.slack],
    }


def zeta_from_jsonable(obj) -> ShootingParams:
    return ShootingParams(
        times=np.asarray(obj["times"], dtype=float),
        states=np.asarray(obj["states"], dtype=float),
        alpha=np.asarray(obj["alpha"], dtype=float),
        beta=np.asarray(obj["beta"], dtype=float),
        slack=np.asarray(obj["slack"], dtype=float),
    )


def config_to_jsonable(cfg: SolverConfig) -> dict:
    return {
        "eps": cfg.eps,
        "switch_radius": cfg.switch_radius,
        "max_sa_iters": cfg.max_sa_iters,
        "max_nr_iters": cfg.max_nr_iters,
        "max_total_iters": cfg.max_total_iters,
        "schedule": str(cfg.schedule),
        "noise_scale": cfg.noise_scale,
        "noise_distribution": cfg.noise_distribution,
        "phi_sign": cfg.phi_sign,
        "block_signs": cfg.block_signs,
        "damping_halvings": cfg.damping_halvings,
        "divergence_window": cfg.divergence_window,
        "radius_shrink": cfg.radius_shrink,
        "seed": cfg.seed,
        "grid_nodes": cfg.grid_nodes,
        "fd_scheme": cfg.fd_scheme,
        "fd_rel_step": cfg.fd_rel_step,
    }


def write_summary_json(path, instance_name, result, cfg, block_norms=None) -> None:
    payload = {
        "instance": instance_name,
        "converged": bool(result.converged),
        "phi_norm": float(result.phi_norm),
        "reason": result.reason,
        "reversions": int(result.reversions),
        "iterations": result.trace.phase_counts(),
        "seed": int(cfg.seed),
        "config": config_to_jsonable(cfg),
        "certificate": result.certificate,
        "zeta": zeta_to_jsonable(result.zeta)
        if result.zeta is not None
        else [float(v) for v in result.z],
        "block_residual_norms": block_norms or {},
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_summary_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# Linear problem files
# ---------------------------------------------------------------------------


def load_problem_json(path):
    """Build (ProblemSpec, initial ShootingParams) from a linear-problem file.

    Schema (all arrays plain JSON lists)::

        {
          "name": str,
          "A": [[...]], "B": [[...]],
          "control_lo": [...], "control_hi": [...],
          "lambda": float,
          "times": [t_0, ..., t_nu],          # initial guesses
          "fixed_times": [t or null, ...],    # equality-pinned entries
          "fixed_states": {"0": [..or null..], ...},  # per instant, per component
          "windows": {"lower": [...], "upper": [...]},
          "endpoint_cost": {"instant": k, "weights": [...], "offset": c}  # optional
        }
    """
    with open(path) as fh:
        spec = json.load(fh)
    a = np.asarray(spec["A"], dtype=float)
    b = np.asarray(spec["B"], dtype=float)
    system = ControlSystem.from_lti(a, b)
    controls = AdmissibleSet.box(spec["control_lo"], spec["control_hi"])
    times = np.asarray(spec["times"], dtype=float)
    nu = len(times) - 1
    d = system.dim_state

    eqs = []
    for k, tv in enumerate(spec.get("fixed_times", [])):
        if tv is not None:
            eqs.append(BoundaryFunction.fix_time(k, float(tv), nu=nu, name=f"t_{k}"))
    states0 = np.zeros((nu + 1, d + 1))
    for key, vals in spec.get("fixed_states", {}).items():
        k = int(key)
        for i, v in enumerate(vals):
            if v is not None:
                eqs.append(
                    BoundaryFunction.fix_state(k, 1 + i, float(v), name=f"x[{i}](t_{k})")
                )
                states0[k, 1 + i] = float(v)
    raw = IntermediateSpec(nu=nu, equalities=eqs)
    win = spec.get("windows")
    if win is None:
        windows = SparsityWindows.inactive(nu, float(times[-1] - times[0]))
    else:
        windows = SparsityWindows(lower=win["lower"], upper=win["upper"])
    constraints = augment_problem(system, windows, raw)
    ell = None
    if "endpoint_cost" in spec:
        ec = spec["endpoint_cost"]
        ell = BoundaryFunction.linear_state(
            int(ec["instant"]),
            np.asarray(ec["weights"], dtype=float),
            -float(ec.get("offset", 0.0)),
            name="ell",
        )
    problem = ProblemSpec(
        name=spec.get("name", os.path.basename(path)),
        system=system,
        controls=controls,
        objective=ObjectiveSpec(lam=float(spec.get("lambda", 1.0)), endpoint_cost=ell),
        constraints=constraints,
        windows=windows,
    )
    zeta0 = ShootingParams(
        times=times,
        states=states0,
        alpha=np.zeros(problem.n_eq),
        beta=np.zeros(problem.n_ineq),
        slack=np.ones(problem.n_ineq),
    )
    g = problem.constraints.ineq_values(zeta0.gamma())
    zeta0.slack = np.sqrt(np.maximum(-g, 1e-6))
    return problem, zeta0
