"""
cli.py
------

Command-line front end: ``sparsepmp solve`` runs a benchmark (or a linear
problem file) through the hybrid solver and writes trajectory/trace/
summary artifacts; ``sparsepmp verify`` re-checks a run directory against
the certificate checklist; ``sparsepmp export`` re-emits run data in
another format.

Exit codes: 0 converged / verified, 1 usage or IO error, 2 iteration
budget exhausted (best iterate still written).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from . import benchmarks, io as run_io
from .integrate import integrate_extremal, refine_switch_times
from .solver import SolverConfig, StepSchedule, solve, solve_root
from .verify import verify_solution

__all__ = ["main", "cmd_solve", "cmd_verify", "cmd_export"]


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="sparsepmp",
        description="Indirect solver for sparse optimal control with intermediate constraints",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    sol = sub.add_parser("solve", help="solve a benchmark instance or problem file")
    sol.add_argument("instance", help="benchmark name (s1, s1-windowed, s2, s3, toy-*) or problem .json")
    sol.add_argument("--eps", type=float, default=None)
    sol.add_argument("--switch-radius", type=float, default=None)
    sol.add_argument("--schedule", type=str, default=None, help="kind:c:a, e.g. root:1e-2:0.2")
    sol.add_argument("--noise-scale", type=float, default=None)
    sol.add_argument("--seed", type=int, default=None)
    sol.add_argument("--max-sa", type=int, default=None)
    sol.add_argument("--max-nr", type=int, default=None)
    sol.add_argument("--grid-nodes", type=int, default=None)
    sol.add_argument("--phi-sign", choices=["plus", "minus"], default=None)
    sol.add_argument("--fd", choices=["central2", "central4"], default=None)
    sol.add_argument("--out", type=str, default="runs")
    sol.add_argument("--format", choices=["csv", "json"], default="csv")

    ver = sub.add_parser("verify", help="re-check a run directory")
    ver.add_argument("rundir")
    ver.add_argument("--instance", default=None, help="override instance name")
    ver.add_argument("--feas-tol", type=float, default=1e-3)
    ver.add_argument("--ham-tol", type=float, default=1e-2)

    exp = sub.add_parser("export", help="re-emit run artifacts in another format")
    exp.add_argument("rundir")
    exp.add_argument("--format", choices=["csv", "json"], default="json")
    return ap


def _apply_overrides(cfg: SolverConfig, args) -> SolverConfig:
    updates = {}
    if args.eps is not None:
        updates["eps"] = args.eps
    if args.switch_radius is not None:
        updates["switch_radius"] = args.switch_radius
    if args.schedule is not None:
        updates["schedule"] = StepSchedule.parse(args.schedule)
    if args.noise_scale is not None:
        updates["noise_scale"] = args.noise_scale
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.max_sa is not None:
        updates["max_sa_iters"] = args.max_sa
    if args.max_nr is not None:
        updates["max_nr_iters"] = args.max_nr
    if args.grid_nodes is not None:
        updates["grid_nodes"] = args.grid_nodes
    if args.phi_sign is not None:
        updates["phi_sign"] = 1 if args.phi_sign == "plus" else -1
    if args.fd is not None:
        updates["fd_scheme"] = args.fd
    return dataclasses.replace(cfg, **updates) if updates else cfg


def cmd_solve(args) -> int:
    name = args.instance
    outdir = os.path.join(args.out, name.replace("/", "_").replace(".json", ""))
    os.makedirs(outdir, exist_ok=True)

    if name.startswith("toy-"):
        try:
            toy = benchmarks.get_toy(name)
        except KeyError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        cfg = _apply_overrides(toy.config, args)
        result = solve_root(toy.fun, toy.z0, cfg)
        run_io.write_trace_csv(os.path.join(outdir, "trace.csv"), result.trace)
        payload = {
            "instance": name,
            "converged": bool(result.converged),
            "phi_norm": float(result.phi_norm),
            "z": [float(v) for v in result.z],
            "known_root": [float(v) for v in toy.root],
            "seed": cfg.seed,
        }
        with open(os.path.join(outdir, "summary.json"), "w") as fh:
            json.dump(payload, fh, indent=2)
        print(
            f"{name}: converged={result.converged} |phi|={result.phi_norm:.3e} "
            f"z={np.array2string(result.z, precision=10)}"
        )
        return 0 if result.converged else 2

    if name.endswith(".json"):
        try:
            problem, zeta0 = run_io.load_problem_json(name)
        except (OSError, KeyError, ValueError) as exc:
            print(f"error loading problem file: {exc}", file=sys.stderr)
            return 1
        cfg = _apply_overrides(SolverConfig(), args)
        inst_name = problem.name
    else:
        try:
            inst = benchmarks.get_instance(name)
        except KeyError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        problem, zeta0 = inst.problem, inst.initial_guess
        cfg = _apply_overrides(inst.config, args)
        inst_name = inst.name

    result = solve(problem, zeta0, cfg)

    rec = None
    if result.zeta is not None:
        try:
            rec = integrate_extremal(
                problem, result.zeta, nodes_per_interval=cfg.grid_nodes
            )
            rec = refine_switch_times(rec, problem)
        except Exception as exc:  # best iterate may be non-integrable
            print(f"warning: could not integrate final iterate: {exc}", file=sys.stderr)

    block_norms = result.residual.block_norms() if result.residual else {}
    run_io.write_summary_json(
        os.path.join(outdir, "summary.json"), inst_name, result, cfg, block_norms
    )
    run_io.write_trace_csv(os.path.join(outdir, "trace.csv"), result.trace)
    if rec is not None:
        run_io.write_trajectory_csv(os.path.join(outdir, "trajectory.csv"), problem, rec)

    counts = result.trace.phase_counts()
    print(
        f"{inst_name}: converged={result.converged} |phi|={result.phi_norm:.6e} "
        f"sa_iters={counts.get('sa', 0)} nr_iters={counts.get('nr', 0)} "
        f"seed={cfg.seed} out={outdir}"
    )
    if result.converged and rec is not None:
        report = verify_solution(problem, result.zeta, rec)
        print(report)
    return 0 if result.converged else 2


def cmd_verify(args) -> int:
    summary_path = os.path.join(args.rundir, "summary.json")
    traj_path = os.path.join(args.rundir, "trajectory.csv")
    try:
        summary = run_io.load_summary_json(summary_path)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error reading summary: {exc}", file=sys.stderr)
        return 1
    name = args.instance or summary.get("instance")
    try:
        inst = benchmarks.get_instance(name)
    except KeyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        zeta = run_io.zeta_from_jsonable(summary["zeta"])
        rec = run_io.load_trajectory_csv(traj_path, inst.problem, zeta.gamma())
    except (OSError, KeyError, ValueError) as exc:
        print(f"error reading trajectory: {exc}", file=sys.stderr)
        return 1
    # rebuild jump records from the stored multipliers for re-evaluation
    from .pmp import Multipliers, jump_residual_apply

    mult = Multipliers(
        eta=inst.problem.eta, alpha=zeta.alpha, beta=zeta.beta, slack=zeta.slack
    )
    for k in range(1, inst.problem.nu):
        rec.jumps.append(jump_residual_apply(inst.problem, k, zeta.gamma(), mult))
    report = verify_solution(
        inst.problem, zeta, rec, feas_tol=args.feas_tol, ham_tol=args.ham_tol
    )
    print(report)
    with open(os.path.join(args.rundir, "verify.json"), "w") as fh:
        json.dump(report.to_dict(), fh, indent=2)
    return 0 if report.passed else 2


def cmd_export(args) -> int:
    summary_path = os.path.join(args.rundir, "summary.json")
    traj_path = os.path.join(args.rundir, "trajectory.csv")
    trace_path = os.path.join(args.rundir, "trace.csv")
    if not os.path.exists(summary_path):
        print("error: run directory has no summary.json", file=sys.stderr)
        return 1
    if args.format == "csv":
        print("run artifacts are already CSV; nothing to do")
        return 0
    out = {}
    try:
        out["summary"] = run_io.load_summary_json(summary_path)
        for key, path in (("trajectory", traj_path), ("trace", trace_path)):
            if os.path.exists(path):
                with open(path) as fh:
                    header = fh.readline().strip().split(",")
                    rows = [line.strip().split(",") for line in fh if line.strip()]
                out[key] = {"columns": header, "rows": rows}
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    target = os.path.join(args.rundir, "export.json")
    with open(target, "w") as fh:
        json.dump(out, fh, indent=2)
    print(f"wrote {target}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "solve":
        return cmd_solve(args)
    if args.command == "verify":
        return cmd_verify(args)
    if args.command == "export":
        return cmd_export(args)
    return 1


if __name__ == "__main__":
    sys.exit(main())
