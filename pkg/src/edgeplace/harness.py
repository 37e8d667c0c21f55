"""Experiment harness: sweeps, solver dispatch, CSV results, aggregation.

Seed pairing: the per-repetition child seed depends on the base seed and the
repetition index only, never on the sweep position, so repetition r sees the
same randomness at every axis value (common random numbers).  Together with
the generator's fixed draw order this pairs scenarios across axis values,
which is what makes sweep comparisons meaningful under heavy-tailed latency
noise.  Child seeds are injective across repetitions.

CSV schema (version 1, stable contract):
  scenario_id, seed, sweep_value, algorithm, global_latency_s,
  edge_containers, edge_container_groups, runtime_ms, admm_iterations,
  feasible
Rows are ordered by (axis position, repetition, algorithm name).  Floats are
written with repr (shortest round-trip), so identical plans yield
byte-identical files when timing capture is disabled.
"""

from __future__ import annotations

import csv
import hashlib
import time
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .model import Scenario, Solution, check_feasible, evaluate_objective
from .latency import LatencyTable, latency_table
from .scenario import GenerationConfig, generate, scenario_to_dict
from .ilp import build_ilp
from .rounding import round_solution
from . import admm as admm_mod
from . import baselines

SWEEP_AXES = ("workload", "storage", "compute", "density", "none")
ALGORITHMS = ("admm", "gr", "ldg", "mdg", "exact")
CSV_COLUMNS = ("scenario_id", "seed", "sweep_value", "algorithm",
               "global_latency_s", "edge_containers", "edge_container_groups",
               "runtime_ms", "admm_iterations", "feasible")
AGGREGATE_COLUMNS = ("metric", "sweep_value", "algorithm", "mean", "std", "count")
_METRICS = ("global_latency_s", "edge_containers", "edge_container_groups",
            "runtime_ms", "admm_iterations")


class InfeasibleResultError(RuntimeError):
    """A solver emitted an infeasible solution; the run must not continue."""

    def __init__(self, algorithm: str, scenario_id: str, failed: list[str],
                 scenario_doc: dict):
        super().__init__(f"algorithm {algorithm!r} produced an infeasible solution "
                         f"on {scenario_id} (violated: {', '.join(failed)})")
        self.algorithm = algorithm
        self.scenario_id = scenario_id
        self.failed = failed
        self.scenario_doc = scenario_doc


@dataclass(frozen=True)
class ExperimentPlan:
    sweep: str = "none"
    values: tuple = ()
    reps: int = 1
    base: GenerationConfig = field(default_factory=GenerationConfig)
    algorithms: tuple[str, ...] = ("admm",)
    base_seed: int = 0
    admm: admm_mod.AdmmParams = field(default_factory=admm_mod.AdmmParams)
    homogeneous: bool = False
    timing: bool = True


def validate_plan(plan: ExperimentPlan) -> None:
    if plan.sweep not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {plan.sweep!r}")
    if plan.sweep != "none":
        if not plan.values:
            raise ValueError("sweep needs at least one axis value")
        if any(b <= a for a, b in zip(plan.values, plan.values[1:])):
            raise ValueError("axis values must be strictly increasing")
    if plan.reps < 1:
        raise ValueError("repetitions must be >= 1")
    if not plan.algorithms:
        raise ValueError("need at least one algorithm")
    for algo in plan.algorithms:
        if algo not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {algo!r}")
    if len(set(plan.algorithms)) != len(plan.algorithms):
        raise ValueError("duplicate algorithm in plan")


@dataclass(frozen=True)
class ResultRow:
    scenario_id: str
    seed: int
    sweep_value: str       # formatted axis value; "base" for un-swept runs
    algorithm: str
    global_latency_s: float
    edge_containers: int
    edge_container_groups: int
    runtime_ms: float
    admm_iterations: int
    feasible: bool


def derive_seed(base_seed: int, repetition: int) -> int:
    """Stable per-repetition child seed, shared across sweep points."""
    digest = hashlib.sha256(f"edgeplace:{base_seed}:{repetition}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def format_value(value) -> str:
    if value == "" or value is None:
        return "base"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def apply_axis(cfg: GenerationConfig, sweep: str, value) -> GenerationConfig:
    """Pin the swept quantity; swept resources become identical across nodes
    (degenerate range), which also keeps generation draw-aligned."""
    if sweep == "none":
        return cfg
    if sweep == "workload":
        return replace(cfg, num_users=int(value))
    if sweep == "storage":
        v = float(value)
        return replace(cfg, scn_storage=(v, v))
    if sweep == "compute":
        v = float(value)
        return replace(cfg, scn_compute=(v, v))
    if sweep == "density":
        return replace(cfg, num_scns=int(value))
    raise ValueError(f"unknown sweep axis {sweep!r}")


def homogeneous_config(cfg: GenerationConfig) -> GenerationConfig:
    """Identical small cells: per-node resource ranges collapse to midpoints."""
    s_lo, s_hi = cfg.scn_storage
    c_lo, c_hi = cfg.scn_compute
    return replace(cfg, scn_storage=((s_lo + s_hi) / 2,) * 2,
                   scn_compute=((c_lo + c_hi) / 2,) * 2)


def count_edge_containers(sol: Solution) -> int:
    """Tasks served at any edge node (one running container per task)."""
    return int(np.asarray(sol.w)[:, :-1].sum())


def count_container_groups(s: Scenario, sol: Solution) -> int:
    """Distinct (node, service) pairs actually serving at least one task."""
    w = np.asarray(sol.w)
    req = s.requested_services
    pairs = {(m, int(req[u]))
             for u in range(s.num_users)
             for m in range(s.num_nodes)
             if w[u, m] == 1}
    return len(pairs)


def solve_one(s: Scenario, lt: LatencyTable, algorithm: str,
              admm_params: admm_mod.AdmmParams | None = None) -> tuple[Solution, int]:
    """Dispatch one solver; returns the solution and its iteration count
    (0 for the non-iterative heuristics)."""
    params = admm_params or admm_mod.AdmmParams()
    if algorithm == "admm":
        inst = build_ilp(s, lt)
        result = admm_mod.run(inst, params)
        sol = round_solution(result.v, s, lt)
        sol.meta.update({"algorithm": "admm", "admm_iterations": result.iterations,
                         "converged": result.converged})
        return sol, result.iterations
    if algorithm == "gr":
        inst = build_ilp(s, lt)
        sol = baselines.gr(s, lt, inst, params)
        return sol, int(sol.meta.get("admm_iterations", 0))
    if algorithm == "ldg":
        return baselines.ldg(s, lt), 0
    if algorithm == "mdg":
        return baselines.mdg(s, lt), 0
    if algorithm == "exact":
        return baselines.exact(s, lt), 0
    raise ValueError(f"unknown algorithm {algorithm!r}")


def run_experiment(plan: ExperimentPlan) -> list[ResultRow]:
    """Execute the plan; every row is validated before it is recorded."""
    validate_plan(plan)
    base = homogeneous_config(plan.base) if plan.homogeneous else plan.base
    points = [("", base)] if plan.sweep == "none" else [
        (v, apply_axis(base, plan.sweep, v)) for v in plan.values]
    algorithms = sorted(plan.algorithms)

    rows: list[ResultRow] = []
    for value, cfg in points:
        value_str = format_value(value)
        for rep in range(plan.reps):
            seed = derive_seed(plan.base_seed, rep)
            s = generate(cfg, seed)
            lt = latency_table(s)
            scenario_id = f"{plan.sweep}-{value_str}-rep{rep}"
            for algo in algorithms:
                start = time.perf_counter()
                sol, iters = solve_one(s, lt, algo, plan.admm)
                elapsed_ms = (time.perf_counter() - start) * 1e3 if plan.timing else 0.0
                report = check_feasible(s, sol)
                if not report.feasible:
                    raise InfeasibleResultError(algo, scenario_id, report.failed(),
                                                scenario_to_dict(s))
                latency = evaluate_objective(s, lt, sol)
                rows.append(ResultRow(
                    scenario_id=scenario_id, seed=seed, sweep_value=value_str,
                    algorithm=algo, global_latency_s=latency,
                    edge_containers=count_edge_containers(sol),
                    edge_container_groups=count_container_groups(s, sol),
                    runtime_ms=elapsed_ms, admm_iterations=iters, feasible=True))
    return rows


def _format_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(rows: list[ResultRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(_format_cell(getattr(row, col)) for col in CSV_COLUMNS) + "\n")


def read_csv(path) -> list[ResultRow]:
    out: list[ResultRow] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV columns: {reader.fieldnames}")
        for rec in reader:
            out.append(ResultRow(
                scenario_id=rec["scenario_id"], seed=int(rec["seed"]),
                sweep_value=rec["sweep_value"], algorithm=rec["algorithm"],
                global_latency_s=float(rec["global_latency_s"]),
                edge_containers=int(rec["edge_containers"]),
                edge_container_groups=int(rec["edge_container_groups"]),
                runtime_ms=float(rec["runtime_ms"]),
                admm_iterations=int(rec["admm_iterations"]),
                feasible=rec["feasible"] == "true"))
    return out


def emit_plot_data(rows: list[ResultRow]) -> dict[str, list[dict]]:
    """Aggregate rows per (axis value, algorithm): mean and population std
    for every metric, one plot-ready table per metric."""
    if not rows:
        raise ValueError("no rows to aggregate")
    value_order: list[str] = []
    groups: dict[tuple[str, str], list[ResultRow]] = {}
    for row in rows:
        if row.sweep_value not in value_order:
            value_order.append(row.sweep_value)
        groups.setdefault((row.sweep_value, row.algorithm), []).append(row)

    tables: dict[str, list[dict]] = {m: [] for m in _METRICS}
    for value in value_order:
        algos = sorted({a for (v, a) in groups if v == value})
        for algo in algos:
            bucket = groups[(value, algo)]
            for metric in _METRICS:
                data = np.array([getattr(r, metric) for r in bucket], dtype=float)
                tables[metric].append({
                    "sweep_value": value, "algorithm": algo,
                    "mean": float(data.mean()), "std": float(data.std()),
                    "count": len(bucket)})
    return tables


def write_aggregate_csv(tables: dict[str, list[dict]], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(AGGREGATE_COLUMNS) + "\n")
        for metric in _METRICS:
            for rec in tables.get(metric, []):
                cells = (metric, rec["sweep_value"], rec["algorithm"],
                         repr(rec["mean"]), repr(rec["std"]), str(rec["count"]))
                fh.write(",".join(cells) + "\n")


def config_from_dict(doc: dict) -> GenerationConfig:
    """Build a GenerationConfig from plain JSON data (lists become tuples)."""
    kwargs = {}
    valid = {f.name: f for f in fields(GenerationConfig)}
    for key, val in doc.items():
        if key not in valid:
            raise ValueError(f"unknown generation option {key!r}")
        kwargs[key] = tuple(val) if isinstance(val, list) else val
    return GenerationConfig(**kwargs)


def plan_from_dict(doc: dict) -> ExperimentPlan:
    """Build an ExperimentPlan from plain JSON data."""
    known = {f.name for f in fields(ExperimentPlan)}
    unknown = set(doc) - known
    if unknown:
        raise ValueError(f"unknown plan options: {sorted(unknown)}")
    kwargs = dict(doc)
    if "values" in kwargs:
        kwargs["values"] = tuple(kwargs["values"])
    if "algorithms" in kwargs:
        kwargs["algorithms"] = tuple(kwargs["algorithms"])
    if "base" in kwargs:
        kwargs["base"] = config_from_dict(kwargs["base"])
    if "admm" in kwargs:
        kwargs["admm"] = admm_mod.AdmmParams(**kwargs["admm"])
    return ExperimentPlan(**kwargs)
