"""Command-line front end.

Subcommands: generate (scenario to JSON), solve (one scenario, one
algorithm), sweep (full experiment plan), aggregate (CSV to plot-ready
tables).  Exit codes: 0 success, 1 a solver produced an infeasible result,
2 invalid input.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from .model import ScenarioError, check_feasible, evaluate_objective
from .scenario import GenerationConfig, generate, load_scenario, save_scenario
from .latency import latency_table
from .ilp import build_ilp, export_lp
from .admm import AdmmParams, AdmmError, run as admm_run
from .rounding import round_solution
from . import baselines
from . import harness


def _add_generation_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="generation config JSON (flags override it)")
    p.add_argument("--users", type=int, help="number of users")
    p.add_argument("--scns", type=int, help="number of small cells")
    p.add_argument("--services", type=int, help="number of services")
    p.add_argument("--layers", type=int, help="number of distinct layers")


def _add_admm_flags(p: argparse.ArgumentParser) -> None:
    group = p.add_argument_group("solver parameters")
    group.add_argument("--admm-rho1", type=float)
    group.add_argument("--admm-rho2", type=float)
    group.add_argument("--admm-rho3", type=float)
    group.add_argument("--admm-rho4", type=float)
    group.add_argument("--admm-gamma", type=float)
    group.add_argument("--admm-max-iters", type=int)
    group.add_argument("--admm-near-binary-tol", type=float)
    group.add_argument("--admm-eq-tol", type=float)
    group.add_argument("--admm-pcg-tol", type=float)
    group.add_argument("--admm-pcg-max-iters", type=int)
    group.add_argument("--admm-rho2-growth", type=float)
    group.add_argument("--admm-rho2-growth-every", type=int)


def _config_from_args(args: argparse.Namespace) -> GenerationConfig:
    cfg = GenerationConfig()
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            cfg = harness.config_from_dict(json.load(fh))
    overrides = {}
    for flag, field_name in (("users", "num_users"), ("scns", "num_scns"),
                             ("services", "num_services"), ("layers", "num_layers")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[field_name] = value
    return replace(cfg, **overrides) if overrides else cfg


def _admm_from_args(args: argparse.Namespace) -> AdmmParams:
    overrides = {}
    for f in fields(AdmmParams):
        value = getattr(args, f"admm_{f.name}", None)
        if value is not None:
            overrides[f.name] = value
    return AdmmParams(**overrides)


def _parse_values(text: str) -> tuple:
    out = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        try:
            out.append(int(token))
        except ValueError:
            out.append(float(token))
    if not out:
        raise ValueError("--values is empty")
    return tuple(out)


def _write_trace(result, path) -> None:
    keys = ("box_gap", "sphere_gap", "eq_residual", "ineq_violation",
            "objective", "pcg_iterations")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("iteration," + ",".join(keys) + "\n")
        for i in range(result.iterations):
            cells = [str(i + 1)]
            for key in keys:
                val = result.trace[key][i]
                cells.append(repr(float(val)) if key != "pcg_iterations" else str(int(val)))
            fh.write(",".join(cells) + "\n")


def _cmd_generate(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    s = generate(cfg, args.seed)
    save_scenario(s, args.out)
    print(f"wrote scenario with {s.num_scns} small cells, {s.num_users} users, "
          f"{s.num_services} services, {s.num_layers} layers to {args.out}")
    return 0


def _cmd_solve(args: argparse.Namespace) -> int:
    if args.scenario:
        s = load_scenario(args.scenario)
        scenario_id = Path(args.scenario).stem
        seed = -1
    else:
        cfg = _config_from_args(args)
        s = generate(cfg, args.seed)
        scenario_id = f"generated-seed{args.seed}"
        seed = args.seed
    lt = latency_table(s)
    params = _admm_from_args(args)

    iters = 0
    if args.algo in ("admm", "gr"):
        inst = build_ilp(s, lt)
        if args.dump_lp:
            export_lp(inst, args.dump_lp)
        run_params = replace(params, rho2=0.0) if args.algo == "gr" else params
        result = admm_run(inst, run_params)
        if args.trace_out:
            _write_trace(result, args.trace_out)
        sol = round_solution(result.v, s, lt)
        iters = result.iterations
    else:
        if args.dump_lp:
            export_lp(build_ilp(s, lt), args.dump_lp)
        sol, iters = harness.solve_one(s, lt, args.algo, params)

    report = check_feasible(s, sol)
    if not report.feasible:
        raise harness.InfeasibleResultError(args.algo, scenario_id, report.failed(), {})
    latency = evaluate_objective(s, lt, sol)
    row = harness.ResultRow(
        scenario_id=scenario_id, seed=seed, sweep_value="base", algorithm=args.algo,
        global_latency_s=latency, edge_containers=harness.count_edge_containers(sol),
        edge_container_groups=harness.count_container_groups(s, sol),
        runtime_ms=0.0, admm_iterations=iters, feasible=True)
    if args.out:
        harness.write_csv([row], args.out)
    if args.dump_solution:
        doc = {"x": np.asarray(sol.x).tolist(), "y": np.asarray(sol.y).tolist(),
               "z": np.asarray(sol.z).tolist(), "w": np.asarray(sol.w).tolist(),
               "objective": sol.objective, "meta": sol.meta}
        with open(args.dump_solution, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1)
    print(f"{args.algo}: latency={latency!r}s edge_containers="
          f"{harness.count_edge_containers(sol)} iterations={iters}")
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    if args.plan:
        with open(args.plan, "r", encoding="utf-8") as fh:
            plan = harness.plan_from_dict(json.load(fh))
        if args.no_timing:
            plan = replace(plan, timing=False)
    else:
        if not args.sweep:
            raise ValueError("either --plan or --sweep is required")
        values = _parse_values(args.values) if args.values else ()
        plan = harness.ExperimentPlan(
            sweep=args.sweep, values=values, reps=args.reps,
            base=_config_from_args(args),
            algorithms=tuple(a.strip() for a in args.algos.split(",") if a.strip()),
            base_seed=args.seed, admm=_admm_from_args(args),
            homogeneous=args.homogeneous, timing=not args.no_timing)
    rows = harness.run_experiment(plan)
    harness.write_csv(rows, args.out)
    print(f"wrote {len(rows)} result rows to {args.out}")
    return 0


def _cmd_aggregate(args: argparse.Namespace) -> int:
    rows = harness.read_csv(args.infile)
    tables = harness.emit_plot_data(rows)
    harness.write_aggregate_csv(tables, args.out)
    n = sum(len(t) for t in tables.values())
    print(f"wrote {n} aggregate rows to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edgeplace",
        description="Joint service/layer placement and task assignment experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="generate a random scenario file")
    _add_generation_flags(p_gen)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=_cmd_generate)

    p_solve = sub.add_parser("solve", help="solve one scenario with one algorithm")
    p_solve.add_argument("--scenario", help="scenario JSON (otherwise generated)")
    _add_generation_flags(p_solve)
    p_solve.add_argument("--seed", type=int, default=0)
    p_solve.add_argument("--algo", required=True, choices=harness.ALGORITHMS)
    p_solve.add_argument("--out", help="write a one-row result CSV here")
    p_solve.add_argument("--dump-solution", help="write the solution as JSON")
    p_solve.add_argument("--dump-lp", help="export the instance in LP format")
    p_solve.add_argument("--trace-out", help="write per-iteration diagnostics CSV")
    p_solve.add_argument("--no-timing", action="store_true")
    _add_admm_flags(p_solve)
    p_solve.set_defaults(func=_cmd_solve)

    p_sweep = sub.add_parser("sweep", help="run an experiment sweep")
    p_sweep.add_argument("--plan", help="experiment plan JSON (overrides flags)")
    p_sweep.add_argument("--sweep", choices=harness.SWEEP_AXES)
    p_sweep.add_argument("--values", help="comma-separated axis values")
    p_sweep.add_argument("--reps", type=int, default=1)
    p_sweep.add_argument("--algos", default="admm")
    p_sweep.add_argument("--seed", type=int, default=0)
    p_sweep.add_argument("--homogeneous", action="store_true")
    p_sweep.add_argument("--no-timing", action="store_true")
    p_sweep.add_argument("--out", required=True)
    _add_generation_flags(p_sweep)
    _add_admm_flags(p_sweep)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_agg = sub.add_parser("aggregate", help="aggregate a result CSV")
    p_agg.add_argument("--in", dest="infile", required=True)
    p_agg.add_argument("--out", required=True)
    p_agg.set_defaults(func=_cmd_aggregate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except harness.InfeasibleResultError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ScenarioError, AdmmError, ValueError, OSError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
