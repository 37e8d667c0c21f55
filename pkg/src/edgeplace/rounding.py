"""Rounding of a relaxed iterate into a feasible binary solution.

Two stages: per-node greedy layer deployment driven by the y block of the
relaxed vector (read as priorities), then a two-pass task assignment driven
by the w block, with the cloud as the terminal fallback.  The access choice
is recovered last from the collapsed-latency argmin table.
"""

from __future__ import annotations

import numpy as np

from .model import Scenario, Solution, evaluate_objective
from .latency import LatencyTable
from .ilp import VariableLayout


def round_layers(v: np.ndarray, s: Scenario,
                 stop_at_first_misfit: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Greedy per-node layer deployment from relaxed priorities.

    Layers with positive priority are visited in descending priority (ties
    to the smaller layer index) and deployed while they fit; by default the
    scan stops at the first layer that does not fit, even if later ones
    would.  `stop_at_first_misfit=False` is the ablation variant that skips
    the misfit and keeps scanning (it can only deploy a superset).  Layers
    with nonpositive priority were never asked for and are skipped.  A
    service counts as deployed exactly where all of its layers are stored.
    """
    lay = VariableLayout.from_scenario(s)
    _, priority, _ = lay.unpack(v)
    sizes = s.catalog.layer_sizes
    member = s.catalog.membership

    y = np.zeros((lay.n_nodes, lay.n_layers), dtype=np.int8)
    for n in range(lay.n_nodes):
        residual = s.nodes[n].storage
        wanted = np.flatnonzero(priority[n] > 0.0)
        order = wanted[np.lexsort((wanted, -priority[n, wanted]))]
        for l in order:
            if sizes[l] <= residual + 1e-9:
                y[n, l] = 1
                residual -= sizes[l]
            elif stop_at_first_misfit:
                break  # first failure ends the scan for this node
    # a service is available where every one of its layers landed
    x = np.zeros((lay.n_nodes, lay.n_services), dtype=np.int8)
    for n in range(lay.n_nodes):
        x[n] = np.all(member <= y[n][None, :], axis=1).astype(np.int8)
    return x, y


def assign_tasks(v: np.ndarray, x: np.ndarray, s: Scenario,
                 lt: LatencyTable) -> tuple[np.ndarray, np.ndarray]:
    """Two-pass assignment given the deployment.

    Pass 1 sends each user to its largest relaxed w entry when that executor
    works (service present or cloud, enough compute left, reachable).
    Everyone else waits in a queue ordered by how much they stand to lose
    (gap between their two best available latencies, descending); pass 2
    drains the queue onto the cheapest workable candidate, the cloud being
    always acceptable.  The access choice follows the collapsed argmin.
    """
    lay = VariableLayout.from_scenario(s)
    _, _, w_rel = lay.unpack(v)
    xi, zeta = lt.xi, lt.zeta
    req = s.requested_services
    demand = s.catalog.compute_demand
    n_nodes, cloud = s.num_nodes, s.cloud_index

    residual = np.array([node.compute for node in s.nodes], dtype=float)
    w = np.zeros((lay.n_users, lay.n_executors), dtype=np.int8)

    def workable(u: int, m: int) -> bool:
        if not np.isfinite(xi[u, m]):
            return False
        if m == cloud:
            return True
        return x[m, req[u]] == 1 and residual[m] >= demand[req[u]] - 1e-9

    def candidates(u: int) -> list[int]:
        cand = [m for m in range(n_nodes)
                if x[m, req[u]] == 1 and np.isfinite(xi[u, m])]
        if np.isfinite(xi[u, cloud]):
            cand.append(cloud)
        return cand

    deferred: list[tuple[float, int]] = []
    for u in range(lay.n_users):
        m_star = int(np.argmax(w_rel[u]))
        if workable(u, m_star):
            w[u, m_star] = 1
            if m_star != cloud:
                residual[m_star] -= demand[req[u]]
        else:
            cand = candidates(u)
            costs = np.sort(xi[u, cand])
            gap = float(costs[1] - costs[0]) if len(cand) >= 2 else np.inf
            deferred.append((gap, u))

    # users with the most to lose pick first; ties to the smaller index
    deferred.sort(key=lambda item: (-item[0], item[1]))
    for _, u in deferred:
        cand = candidates(u)
        cand.sort(key=lambda m: (xi[u, m], m))
        for m in cand:
            if workable(u, m):
                w[u, m] = 1
                if m != cloud:
                    residual[m] -= demand[req[u]]
                break
        else:
            raise ValueError(f"user {u} cannot reach any workable executor")

    z = np.zeros((lay.n_users, n_nodes), dtype=np.int8)
    for u in range(lay.n_users):
        m = int(np.argmax(w[u]))
        z[u, zeta[u, m]] = 1
    return w, z


def round_solution(v: np.ndarray, s: Scenario, lt: LatencyTable) -> Solution:
    """Full rounding: deployment, assignment, access recovery, objective."""
    x, y = round_layers(v, s)
    w, z = assign_tasks(v, x, s, lt)
    sol = Solution(x=x, y=y, z=z, w=w)
    sol.objective = evaluate_objective(s, lt, sol)
    # diagnostic only, never gated on: how decisively the relaxation picked
    # each user's executor (fraction of users whose largest w entry is
    # within 0.02 of 1)
    lay = VariableLayout.from_scenario(s)
    _, _, w_rel = lay.unpack(v)
    sol.meta["relaxed_w_peak_fraction"] = float(
        np.mean(w_rel.max(axis=1) >= 0.98))
    return sol
