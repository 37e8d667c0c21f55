"""Rounding a relaxed vector into a feasible solution.

The layer stage is pinned with hand-sized knapsacks (priority order, ties,
first-misfit stop, and its keep-scanning ablation); the assignment stage
with two-user contention games where the queue order decides who gets the
last compute slot; and the whole pipeline with a feasibility property over
random relaxed vectors.
"""

import dataclasses

import numpy as np
import pytest

from edgeplace.model import (MicroserviceCatalog, Scenario, Topology, UserSpec,
                             check_feasible, evaluate_objective)
from edgeplace.latency import latency_table
from edgeplace.ilp import VariableLayout, build_ilp
from edgeplace.admm import AdmmParams, run
from edgeplace.rounding import round_layers, assign_tasks, round_solution

from conftest import hand_scenario, all_cloud_solution, make_node, unit_snr_gain


def packed(s, y_priority=None, w_rel=None):
    lay = VariableLayout.from_scenario(s)
    v = np.zeros(lay.q)
    if y_priority is not None:
        v[lay.y_slice] = np.asarray(y_priority, float).reshape(-1)
    if w_rel is not None:
        v[lay.w_slice] = np.asarray(w_rel, float).reshape(-1)
    return v


# --- layer deployment ---------------------------------------------------------

def knapsack_scenario(storage=120.0):
    # one SCN with three layers: 100, 50, 15 MB; one service needing l0+l1
    return hand_scenario(n_scn=1, storage=(storage,), compute=(2.0,),
                         services=(0,), demands=(0.5,),
                         membership=((1, 1, 0),), layer_sizes=(100.0, 50.0, 15.0))


def test_layers_deploy_in_priority_order_until_first_misfit():
    s = knapsack_scenario(storage=120.0)
    v = packed(s, y_priority=[[0.9, 0.8, 0.7], [0.0, 0.0, 0.0]])
    x, y = round_layers(v, s)
    # l0 fits (residual 20), l1 does not: the scan stops before reaching l2
    assert y[0].tolist() == [1, 0, 0]
    assert x[0, 0] == 0  # service needs l0 and l1


def test_misfit_skip_ablation_keeps_scanning():
    s = knapsack_scenario(storage=120.0)
    v = packed(s, y_priority=[[0.9, 0.8, 0.7], [0.0, 0.0, 0.0]])
    _, y = round_layers(v, s, stop_at_first_misfit=False)
    assert y[0].tolist() == [1, 0, 1]  # l2 still fits after skipping l1


def test_priority_ties_break_to_smaller_layer_index():
    s = knapsack_scenario(storage=100.0)
    v = packed(s, y_priority=[[0.5, 0.5, 0.0], [0.0, 0.0, 0.0]])
    _, y = round_layers(v, s)
    assert y[0].tolist() == [1, 0, 0]  # l0 first on the tie, then l1 misfits


def test_nonpositive_priorities_are_never_deployed():
    s = knapsack_scenario(storage=1000.0)  # room for everything
    v = packed(s, y_priority=[[0.0, -0.3, 0.6], [0.0, 0.0, 0.0]])
    x, y = round_layers(v, s)
    assert y[0].tolist() == [0, 0, 1]
    assert x[0, 0] == 0


def test_service_marked_where_all_layers_present():
    s = knapsack_scenario(storage=160.0)
    v = packed(s, y_priority=[[0.9, 0.8, 0.1], [0.9, 0.8, 0.7]])
    x, y = round_layers(v, s)
    assert y[0].tolist() == [1, 1, 0]   # 150 of 160 used, l2 misfits
    assert x[0, 0] == 1
    assert y[1].tolist() == [1, 1, 1]   # MCN storage is plentiful
    assert x[1, 0] == 1


def test_rounded_layers_never_exceed_storage(tiny_scenario):
    rng = np.random.default_rng(21)
    sizes = tiny_scenario.catalog.layer_sizes
    lay = VariableLayout.from_scenario(tiny_scenario)
    for _ in range(20):
        v = rng.random(lay.q)
        for stop in (True, False):
            _, y = round_layers(v, tiny_scenario, stop_at_first_misfit=stop)
            used = y @ sizes
            for n, node in enumerate(tiny_scenario.nodes):
                assert used[n] <= node.storage + 1e-9


def test_misfit_skip_deploys_a_superset(tiny_scenario):
    rng = np.random.default_rng(22)
    for _ in range(20):
        v = rng.random(VariableLayout.from_scenario(tiny_scenario).q)
        _, y_stop = round_layers(v, tiny_scenario)
        _, y_skip = round_layers(v, tiny_scenario, stop_at_first_misfit=False)
        assert np.all(y_skip >= y_stop)


# --- task assignment ------------------------------------------------------------

def contention_scenario(data_sizes=(6.0, 6.0)):
    """Two SCNs + MCN; SCN 0 deployed with exactly one compute slot; both
    users' relaxed peaks point at the undeployed SCN 1, so both are deferred
    and must share SCN 0 and the cloud."""
    s = hand_scenario(n_scn=2, compute=(0.5, 2.0), demands=(0.5,),
                      services=(0, 0))
    users = tuple(dataclasses.replace(u, data_size=d)
                  for u, d in zip(s.users, data_sizes))
    return dataclasses.replace(s, users=users)


def deployed_on_scn0(s):
    x = np.zeros((s.num_nodes, s.num_services), np.int8)
    x[0, 0] = 1
    return x


def test_pass_one_commits_to_the_relaxed_peak_even_when_costlier():
    s = contention_scenario()
    lt = latency_table(s)
    # cloud (xi = 1.3 s) is strictly worse than deployed SCN 0 (1.0 s), but
    # the relaxation said cloud, and the cloud always works
    w_rel = [[0.05, 0.0, 0.0, 0.9], [0.9, 0.0, 0.0, 0.0]]
    w, z = assign_tasks(packed(s, w_rel=w_rel), deployed_on_scn0(s), s, lt)
    assert w[0].tolist() == [0, 0, 0, 1]
    assert w[1].tolist() == [1, 0, 0, 0]
    # access recovery: direct for the edge task, via the MCN for the cloud
    assert z[1].tolist() == [1, 0, 0]
    assert z[0].tolist() == [0, 0, 1]


def test_deferred_users_with_equal_stakes_drain_in_index_order():
    s = contention_scenario(data_sizes=(6.0, 6.0))
    lt = latency_table(s)
    w_rel = [[0.0, 0.9, 0.0, 0.0], [0.0, 0.9, 0.0, 0.0]]  # both point at SCN 1
    w, _ = assign_tasks(packed(s, w_rel=w_rel), deployed_on_scn0(s), s, lt)
    # equal gaps: user 0 picks first and takes the single SCN 0 slot
    assert w[0].tolist() == [1, 0, 0, 0]
    assert w[1].tolist() == [0, 0, 0, 1]


def test_deferred_user_with_more_to_lose_picks_first():
    # user 0 uploads 3 Mbit (gap 0.15 s), user 1 uploads 6 Mbit (gap 0.3 s)
    s = contention_scenario(data_sizes=(3.0, 6.0))
    lt = latency_table(s)
    w_rel = [[0.0, 0.9, 0.0, 0.0], [0.0, 0.9, 0.0, 0.0]]
    w, _ = assign_tasks(packed(s, w_rel=w_rel), deployed_on_scn0(s), s, lt)
    assert w[1].tolist() == [1, 0, 0, 0]  # the bigger gap wins the slot
    assert w[0].tolist() == [0, 0, 0, 1]


def test_compute_residual_tracks_multiple_tenants():
    s = hand_scenario(n_scn=1, storage=(1000.0,), compute=(1.0,),
                      demands=(0.5,), services=(0, 0, 0),
                      membership=((1, 1),))
    lt = latency_table(s)
    x = np.zeros((2, 1), np.int8)
    x[0, 0] = 1
    # all three relaxed peaks point at SCN 0; only two demands of 0.5 fit
    w_rel = [[0.9, 0.0, 0.0]] * 3
    w, _ = assign_tasks(packed(s, w_rel=w_rel), x, s, lt)
    assert w[:, 0].sum() == 2
    assert w[2].tolist() == [0, 0, 1]  # pass 1 walks users in index order


def test_single_candidate_deferral_lands_on_cloud():
    s = hand_scenario()  # nothing deployed anywhere
    lt = latency_table(s)
    w_rel = [[0.9, 0.0, 0.0, 0.0], [0.0, 0.9, 0.0, 0.0]]
    w, _ = assign_tasks(packed(s, w_rel=w_rel), np.zeros((3, 1), np.int8), s, lt)
    np.testing.assert_array_equal(w[:, -1], 1)


def test_assignment_raises_when_no_executor_works():
    # the user reaches only SCN 0, which has no wired links at all: with no
    # deployment there, not even the cloud is an option
    nodes = (make_node("scn", (0.0, 0.0), 1000.0, 2.0, radius=50.0),
             make_node("mcn", (200.0, 0.0), 2250.0, 3.0, radius=0.0))
    adjacency = np.zeros((2, 3), np.int8)
    np.fill_diagonal(adjacency[:, :2], 1)
    adjacency[1, 2] = 1
    topology = Topology(adjacency, np.zeros((2, 2)), 20.0)
    catalog = MicroserviceCatalog(np.array([100.0]), np.array([[1]], np.int8),
                                  np.array([0.5]))
    user = UserSpec(np.zeros(2), 0, 6.0, 1.0,
                    np.array([unit_snr_gain(1.0), unit_snr_gain(200.0)]))
    s = Scenario(nodes=nodes, topology=topology, catalog=catalog, users=(user,))
    lt = latency_table(s)
    assert not np.isfinite(lt.xi[0, s.cloud_index])
    with pytest.raises(ValueError, match="user 0"):
        assign_tasks(packed(s), np.zeros((2, 1), np.int8), s, lt)


# --- full pipeline ----------------------------------------------------------------

def test_zero_vector_rounds_to_everyone_on_the_cloud(tiny_scenario, tiny_table):
    s, lt = tiny_scenario, tiny_table
    sol = round_solution(np.zeros(VariableLayout.from_scenario(s).q), s, lt)
    assert sol.x.sum() == 0 and sol.y.sum() == 0
    np.testing.assert_array_equal(sol.w[:, -1], 1)
    assert sol.objective == pytest.approx(lt.xi[:, -1].sum())
    assert check_feasible(s, sol).feasible


def test_random_vectors_always_round_to_feasible(tiny_scenario, tiny_table):
    s, lt = tiny_scenario, tiny_table
    rng = np.random.default_rng(23)
    for _ in range(30):
        sol = round_solution(rng.random(VariableLayout.from_scenario(s).q), s, lt)
        report = check_feasible(s, sol)
        assert report.feasible, str(report)
        assert np.isfinite(sol.objective)
        assert sol.objective == pytest.approx(evaluate_objective(s, lt, sol))


def test_rounding_is_deterministic(tiny_scenario, tiny_table):
    v = np.random.default_rng(24).random(
        VariableLayout.from_scenario(tiny_scenario).q)
    a = round_solution(v, tiny_scenario, tiny_table)
    b = round_solution(v, tiny_scenario, tiny_table)
    np.testing.assert_array_equal(a.w, b.w)
    np.testing.assert_array_equal(a.y, b.y)
    assert a.objective == b.objective


def test_peak_fraction_diagnostic():
    s = contention_scenario()
    lt = latency_table(s)
    lay = VariableLayout.from_scenario(s)
    v = np.zeros(lay.q)
    w = np.zeros((2, 4))
    w[0, 3] = 1.0   # decisive
    w[1, 0] = 0.5   # fractional
    v[lay.w_slice] = w.reshape(-1)
    sol = round_solution(v, s, lt)
    assert sol.meta["relaxed_w_peak_fraction"] == pytest.approx(0.5)


def test_solver_output_rounds_no_worse_than_trivial_fallback(tiny_scenario,
                                                             tiny_table):
    s, lt = tiny_scenario, tiny_table
    inst = build_ilp(s, lt)
    result = run(inst, AdmmParams(max_iters=300))
    sol = round_solution(result.v, s, lt)
    assert check_feasible(s, sol).feasible
    cloud_only = lt.xi[:, -1].sum()
    assert sol.objective <= cloud_only + 1e-9
