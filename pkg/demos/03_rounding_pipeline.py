#!/usr/bin/env python3
"""From a fractional iterate to a deployable plan, step by step.

Runs the relaxation on a small instance, then shows the two recovery
stages: layers are pulled onto each node in order of their fractional
priority until storage runs out (a service counts as deployed once every
layer it needs is present), and tasks are assigned executor-by-executor,
serving the users with the most to lose first and spilling the rest to the
macro cell or cloud when compute fills up.  The result is compared against
the everything-on-the-cloud plan it is supposed to beat.
"""

import numpy as np

from edgeplace.scenario import GenerationConfig, generate
from edgeplace.latency import latency_table
from edgeplace.ilp import build_ilp
from edgeplace.admm import AdmmParams, run
from edgeplace.rounding import assign_tasks, round_layers
from edgeplace.model import check_feasible, evaluate_objective, Solution

np.set_printoptions(precision=3, suppress=True)

CFG = GenerationConfig(num_scns=3, num_users=8, num_services=4,
                       num_layers=10, layers_per_service=(3, 6),
                       scn_storage=(200.0, 550.0), scn_compute=(0.7, 1.3))
SEED = 424


def show_layer_rounding(v, s, inst):
    lay = inst.layout
    y_rel = v[lay.y_slice].reshape(lay.n_nodes, lay.n_layers)
    x, y = round_layers(v, s)
    sizes = s.catalog.layer_sizes
    print("layer placement, node by node (greedy by fractional priority):")
    for n in range(lay.n_nodes):
        kept = np.flatnonzero(y[n])
        used = float(sizes @ y[n])
        print(f"  node {n}: capacity {s.nodes[n].storage:6.0f} MB -> "
              f"layers {list(kept)} ({used:.0f} MB used)")
        order = np.argsort(-y_rel[n])
        top = [f"l{l}({y_rel[n, l]:.2f})" for l in order[:4]]
        print(f"           highest priorities: {', '.join(top)}")
    print("services complete per node (all required layers present):")
    for n in range(lay.n_nodes):
        print(f"  node {n}: services {list(np.flatnonzero(x[n]))}")
    return x, y


def show_assignment(v, x, s, lt):
    z, w = assign_tasks(v, x, s, lt)
    req = s.requested_services
    print("\ntask assignment (stake-ordered, capacity-aware):")
    for u in range(s.num_users):
        m = int(np.argmax(w[u]))
        where = "cloud" if m == s.cloud_index else f"node {m}"
        acc = int(np.argmax(z[u]))
        t = lt.t[u, acc, m]
        print(f"  user {u} (service {req[u]}): {where} via access {acc}, "
              f"{t:.3f}s")
    return z, w


def main():
    s = generate(CFG, SEED)
    lt = latency_table(s)
    inst = build_ilp(s, lt)
    result = run(inst, AdmmParams(rho2=0.2, rho4=1.0, rho2_growth=1.05,
                                  rho2_growth_every=25, max_iters=2000))

    x, y = show_layer_rounding(result.v, s, inst)
    z, w = show_assignment(result.v, x, s, lt)

    sol = Solution(x=x, y=y, z=z, w=w)
    report = check_feasible(s, sol)
    total = evaluate_objective(s, lt, sol)
    print(f"\nfeasible: {report.feasible}")
    print(f"total latency: {total:.3f}s")

    cloud_only = float(lt.xi[:, -1].sum())
    print(f"everything-on-the-cloud would cost: {cloud_only:.3f}s "
          f"({cloud_only - total:+.3f}s saved by deploying at the edge)")


if __name__ == "__main__":
    main()
