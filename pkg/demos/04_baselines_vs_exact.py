#!/usr/bin/env python3
"""Compare every solver against the exact optimum on small instances.

On instances small enough for the branch-and-prune oracle (few cells, few
users), runs the full pipeline (relaxation + rounding), the sphere-free
relaxation variant, the latency-gap greedy, and the popularity greedy, and
prints each total latency next to the true optimum, followed by averages.
"""

import numpy as np

from edgeplace.scenario import GenerationConfig, generate
from edgeplace.latency import latency_table
from edgeplace.ilp import build_ilp
from edgeplace.admm import AdmmParams, run
from edgeplace.rounding import round_solution
from edgeplace.baselines import exact, gr, ldg, mdg

SHAPE = dict(num_scns=3, num_users=8, num_services=4, num_layers=10,
             layers_per_service=(3, 6),
             scn_storage=(200.0, 550.0), scn_compute=(0.7, 1.3))
PARAMS = AdmmParams(rho2=0.2, rho4=1.0, rho2_growth=1.05,
                    rho2_growth_every=25, max_iters=4000)
SEEDS = range(1000, 1012)


def main():
    names = ("exact", "ours", "gr", "ldg", "mdg")
    totals = {n: [] for n in names}

    print(f"{'seed':>6} {'exact':>8} {'ours':>8} {'gr':>8} "
          f"{'ldg':>8} {'mdg':>8}")
    for seed in SEEDS:
        s = generate(GenerationConfig(**SHAPE), seed)
        lt = latency_table(s)
        inst = build_ilp(s, lt)
        row = {
            "exact": exact(s, lt).objective,
            "ours": round_solution(run(inst, PARAMS).v, s, lt).objective,
            "gr": gr(s, lt, inst, PARAMS).objective,
            "ldg": ldg(s, lt).objective,
            "mdg": mdg(s, lt).objective,
        }
        for n in names:
            totals[n].append(row[n])
        print(f"{seed:6d} " + " ".join(f"{row[n]:8.3f}" for n in names))

    means = {n: float(np.mean(totals[n])) for n in names}
    print("-" * 48)
    print(f"{'mean':>6} " + " ".join(f"{means[n]:8.3f}" for n in names))
    opt = means["exact"]
    print("\nmean excess over the optimum:")
    for n in names[1:]:
        print(f"  {n:5s} +{means[n] - opt:6.3f}s "
              f"({100 * (means[n] / opt - 1):5.1f}%)")


if __name__ == "__main__":
    main()
