"""Benchmark solvers: two greedy heuristics, a box-only relaxation, and an
exhaustive oracle for small instances.

All four return a Solution that passes the full feasibility check.  The
cloud participates in every ascending-latency scan (it simply needs no
capacity), so "fallback" only means "the remaining option when no edge node
works".  Tie-breaks are by smaller index everywhere, making every solver
deterministic for a fixed scenario.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace

import numpy as np

from .model import Scenario, Solution, coverage_matrix, evaluate_objective
from .latency import LatencyTable
from .ilp import IlpInstance
from . import admm as admm_mod
from .rounding import round_solution


def _recover_access(w: np.ndarray, zeta: np.ndarray, n_nodes: int) -> np.ndarray:
    z = np.zeros((w.shape[0], n_nodes), dtype=np.int8)
    for u in range(w.shape[0]):
        m = int(np.argmax(w[u]))
        z[u, zeta[u, m]] = 1
    return z


def _finish(s: Scenario, lt: LatencyTable, x, y, w, meta: dict) -> Solution:
    sol = Solution(x=x, y=y, z=_recover_access(w, lt.zeta, s.num_nodes), w=w, meta=meta)
    sol.objective = evaluate_objective(s, lt, sol)
    return sol


def ldg(s: Scenario, lt: LatencyTable) -> Solution:
    """Latency-difference greedy.

    Users act in descending order of (second-best - best) collapsed latency;
    each takes the cheapest executor that can still host it, deploying the
    service's missing layers on acceptance.  Users with a single reachable
    executor have an infinite difference and act first.
    """
    xi = lt.xi
    req = s.requested_services
    demand = s.catalog.compute_demand
    sizes = s.catalog.layer_sizes
    member = s.catalog.membership
    n_nodes, cloud = s.num_nodes, s.cloud_index

    gaps = np.empty(s.num_users)
    for u in range(s.num_users):
        finite = np.sort(xi[u][np.isfinite(xi[u])])
        gaps[u] = finite[1] - finite[0] if finite.size >= 2 else np.inf
    order = sorted(range(s.num_users), key=lambda u: (-gaps[u], u))

    y = np.zeros((n_nodes, s.num_layers), dtype=np.int8)
    x = np.zeros((n_nodes, s.num_services), dtype=np.int8)
    storage = np.array([node.storage for node in s.nodes], dtype=float)
    compute = np.array([node.compute for node in s.nodes], dtype=float)
    w = np.zeros((s.num_users, n_nodes + 1), dtype=np.int8)

    for u in order:
        svc = req[u]
        need_layers = member[svc].astype(bool)
        placed = False
        for m in sorted(range(n_nodes + 1), key=lambda m: (xi[u, m], m)):
            if not np.isfinite(xi[u, m]):
                break
            if m == cloud:
                w[u, cloud] = 1
                placed = True
                break
            if compute[m] < demand[svc] - 1e-9:
                continue
            missing = need_layers & (y[m] == 0)
            cost = float(sizes[missing].sum())
            if cost <= storage[m] + 1e-9:
                y[m, missing] = 1
                x[m, svc] = 1
                storage[m] -= cost
                compute[m] -= demand[svc]
                w[u, m] = 1
                placed = True
                break
        if not placed:
            raise ValueError(f"user {u} cannot reach any executor")
    return _finish(s, lt, x, y, w, {"algorithm": "ldg"})


def mdg(s: Scenario, lt: LatencyTable) -> Solution:
    """Popularity greedy.

    Each node deploys the services requested most often inside its coverage
    (ties to the smaller index), stopping at the first service whose missing
    layers no longer fit.  Users then take the cheapest executor that hosts
    their service with compute to spare, in user-index order.
    """
    xi = lt.xi
    req = s.requested_services
    demand = s.catalog.compute_demand
    sizes = s.catalog.layer_sizes
    member = s.catalog.membership
    n_nodes, cloud = s.num_nodes, s.cloud_index
    cov = coverage_matrix(s)

    counts = np.zeros((n_nodes, s.num_services), dtype=int)
    for u in range(s.num_users):
        counts[cov[u].astype(bool), req[u]] += 1

    y = np.zeros((n_nodes, s.num_layers), dtype=np.int8)
    x = np.zeros((n_nodes, s.num_services), dtype=np.int8)
    for n in range(n_nodes):
        residual = s.nodes[n].storage
        ranked = sorted(np.flatnonzero(counts[n] > 0),
                        key=lambda i: (-counts[n, i], i))
        for svc in ranked:
            missing = member[svc].astype(bool) & (y[n] == 0)
            cost = float(sizes[missing].sum())
            if cost <= residual + 1e-9:
                y[n, missing] = 1
                x[n, svc] = 1
                residual -= cost
            else:
                break  # first failure ends this node's deployment

    compute = np.array([node.compute for node in s.nodes], dtype=float)
    w = np.zeros((s.num_users, n_nodes + 1), dtype=np.int8)
    for u in range(s.num_users):
        svc = req[u]
        placed = False
        for m in sorted(range(n_nodes + 1), key=lambda m: (xi[u, m], m)):
            if not np.isfinite(xi[u, m]):
                break
            if m == cloud:
                w[u, cloud] = 1
                placed = True
                break
            if x[m, svc] == 1 and compute[m] >= demand[svc] - 1e-9:
                compute[m] -= demand[svc]
                w[u, m] = 1
                placed = True
                break
        if not placed:
            raise ValueError(f"user {u} cannot reach any executor")
    return _finish(s, lt, x, y, w, {"algorithm": "mdg"})


def gr(s: Scenario, lt: LatencyTable, inst: IlpInstance,
       params: admm_mod.AdmmParams | None = None) -> Solution:
    """Box-only relaxation: identical iteration with the sphere disabled
    (rho2 = 0, its auxiliary and dual never move), then the same rounding."""
    base = params or admm_mod.AdmmParams()
    result = admm_mod.run(inst, replace(base, rho2=0.0))
    sol = round_solution(result.v, s, lt)
    sol.meta.update({"algorithm": "gr", "admm_iterations": result.iterations,
                     "converged": result.converged})
    return sol


@dataclass(frozen=True)
class OracleLimits:
    max_scns: int = 4
    max_users: int = 8
    max_services: int = 4
    max_layers: int = 10


class OracleLimitError(ValueError):
    """Instance too large for exhaustive optimization."""


def exact(s: Scenario, lt: LatencyTable, limits: OracleLimits | None = None) -> Solution:
    """Globally optimal deployment + assignment by exhaustive search.

    Per node, only maximal storage-feasible service sets matter: deploying
    more services never hurts because storage is the only deployment cost
    and compute binds per assigned task.  For each combination of per-node
    service sets, the user assignment is solved by depth-first search with
    an additive lower bound, memoized on which requested services each node
    offers.  Latency floors shared by all algorithms stay in the objective.
    """
    lim = limits or OracleLimits()
    dims = {"scns": s.num_scns, "users": s.num_users,
            "services": s.num_services, "layers": s.num_layers}
    caps = {"scns": lim.max_scns, "users": lim.max_users,
            "services": lim.max_services, "layers": lim.max_layers}
    over = {k: (dims[k], caps[k]) for k in dims if dims[k] > caps[k]}
    if over:
        raise OracleLimitError(f"instance exceeds oracle limits: {over}")

    xi = lt.xi
    req = s.requested_services
    demand = s.catalog.compute_demand
    sizes = s.catalog.layer_sizes
    member = s.catalog.membership.astype(bool)
    n_nodes, cloud = s.num_nodes, s.cloud_index
    n_users = s.num_users
    requested = sorted(set(int(r) for r in req))

    def union_cost(svcs: tuple[int, ...]) -> float:
        if not svcs:
            return 0.0
        layers = np.any(member[list(svcs)], axis=0)
        return float(sizes[layers].sum())

    # per node: maximal service subsets that fit its storage
    per_node: list[list[tuple[int, ...]]] = []
    all_sets = [tuple(c) for r in range(s.num_services + 1)
                for c in itertools.combinations(range(s.num_services), r)]
    for n in range(n_nodes):
        cap = s.nodes[n].storage + 1e-9
        feas = [t for t in all_sets if union_cost(t) <= cap]
        feas_sets = [frozenset(t) for t in feas]
        maximal = [t for t, fs in zip(feas, feas_sets)
                   if not any(fs < other for other in feas_sets)]
        per_node.append(maximal)

    compute0 = tuple(float(node.compute) for node in s.nodes)
    memo: dict[tuple, tuple[float, tuple[int, ...]]] = {}

    def solve_assignment(avail: tuple[frozenset, ...]) -> tuple[float, tuple[int, ...]]:
        """Min-cost user assignment given which services each node offers."""
        key = avail
        if key in memo:
            return memo[key]
        cand: list[list[int]] = []
        for u in range(n_users):
            opts = [m for m in range(n_nodes)
                    if int(req[u]) in avail[m] and np.isfinite(xi[u, m])]
            if np.isfinite(xi[u, cloud]):
                opts.append(cloud)
            opts.sort(key=lambda m: (xi[u, m], m))
            cand.append(opts)
        if any(not c for c in cand):
            memo[key] = (np.inf, ())
            return memo[key]
        floor = np.array([xi[u, cand[u][0]] for u in range(n_users)])
        # handle fussy users first: big regret, then few options
        def regret(u: int) -> float:
            return xi[u, cand[u][1]] - xi[u, cand[u][0]] if len(cand[u]) > 1 else np.inf
        order = sorted(range(n_users), key=lambda u: (-regret(u), len(cand[u]), u))
        suffix_floor = np.zeros(n_users + 1)
        for pos in range(n_users - 1, -1, -1):
            suffix_floor[pos] = suffix_floor[pos + 1] + floor[order[pos]]

        best_cost = np.inf
        best_pick: list[int] = [cloud] * n_users
        pick = [cloud] * n_users
        residual = list(compute0)

        def dfs(pos: int, cost: float) -> None:
            nonlocal best_cost, best_pick
            if cost + suffix_floor[pos] >= best_cost - 1e-12:
                return
            if pos == n_users:
                best_cost = cost
                best_pick = pick.copy()
                return
            u = order[pos]
            for m in cand[u]:
                if m != cloud:
                    if residual[m] < demand[req[u]] - 1e-9:
                        continue
                    residual[m] -= demand[req[u]]
                pick[u] = m
                dfs(pos + 1, cost + float(xi[u, m]))
                if m != cloud:
                    residual[m] += demand[req[u]]
            pick[u] = cloud

        dfs(0, 0.0)
        memo[key] = (best_cost, tuple(best_pick))
        return memo[key]

    best = (np.inf, None, None)  # cost, deployment, assignment
    for combo in itertools.product(*per_node):
        avail = tuple(frozenset(t) & frozenset(requested) for t in combo)
        cost, pick = solve_assignment(avail)
        if cost < best[0] - 1e-12:
            best = (cost, combo, pick)
    if best[1] is None:
        raise ValueError("no feasible assignment exists for this scenario")

    _, combo, pick = best
    x = np.zeros((n_nodes, s.num_services), dtype=np.int8)
    y = np.zeros((n_nodes, s.num_layers), dtype=np.int8)
    for n, svcs in enumerate(combo):
        for i in svcs:
            x[n, i] = 1
            y[n, member[i]] = 1
    w = np.zeros((n_users, n_nodes + 1), dtype=np.int8)
    for u, m in enumerate(pick):
        w[u, m] = 1
    return _finish(s, lt, x, y, w, {"algorithm": "exact"})
