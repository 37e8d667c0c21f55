#!/usr/bin/env python3
"""Run a seeded experiment sweep and aggregate it for plotting.

Builds an experiment plan that sweeps per-cell storage while holding
everything else fixed, runs it with paired seeds (repetition r sees the
same random scenario at every axis value), writes the row-level CSV and
the aggregated plot table, and prints the latency trend per algorithm.
More storage lets nodes keep more image layers, so total latency should
fall (or at least not rise) along the axis.
"""

import tempfile
from pathlib import Path

from edgeplace.admm import AdmmParams
from edgeplace.harness import (ExperimentPlan, emit_plot_data,
                               run_experiment, write_aggregate_csv,
                               write_csv)
from edgeplace.scenario import GenerationConfig

BASE = GenerationConfig(num_scns=4, num_users=12, num_services=5,
                        num_layers=12, layers_per_service=(3, 6),
                        scn_compute=(0.7, 1.3))
PLAN = ExperimentPlan(
    sweep="storage", values=(250.0, 500.0, 1000.0), reps=4, base=BASE,
    algorithms=("admm", "ldg", "mdg"), base_seed=7,
    admm=AdmmParams(rho2=0.2, rho4=1.0, rho2_growth=1.05,
                    rho2_growth_every=25, max_iters=1500),
    timing=False)


def main():
    rows = run_experiment(PLAN)
    outdir = Path(tempfile.mkdtemp(prefix="edgeplace-sweep-"))
    write_csv(rows, outdir / "results.csv")
    tables = emit_plot_data(rows)
    write_aggregate_csv(tables, outdir / "aggregate.csv")
    print(f"wrote {len(rows)} rows to {outdir}/results.csv and the "
          f"plot table to {outdir}/aggregate.csv\n")

    latency = tables["global_latency_s"]
    algos = sorted({rec["algorithm"] for rec in latency})
    values = []
    for rec in latency:
        if rec["sweep_value"] not in values:
            values.append(rec["sweep_value"])
    print(f"mean total latency (s) over {PLAN.reps} paired repetitions:")
    print(f"{'storage':>10} " + " ".join(f"{a:>8}" for a in algos))
    for value in values:
        cells = []
        for algo in algos:
            rec = next(r for r in latency
                       if r["sweep_value"] == value and r["algorithm"] == algo)
            cells.append(f"{rec['mean']:8.3f}")
        print(f"{value:>10} " + " ".join(cells))

    containers = tables["edge_containers"]
    print("\nmean tasks served at the edge:")
    for value in values:
        rec = next(r for r in containers
                   if r["sweep_value"] == value and r["algorithm"] == "admm")
        print(f"  storage {value}: {rec['mean']:.1f} of {BASE.num_users}")


if __name__ == "__main__":
    main()
