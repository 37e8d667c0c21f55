"""Shared fixtures: hand-built micro-networks and generated scenarios.

The hand-built fixtures pin every physical quantity to values whose
latencies can be recomputed on paper (unit SNR distances, round bandwidth
numbers), so tests can assert exact seconds rather than re-deriving them
with the code under test.
"""

import numpy as np
import pytest

from edgeplace.model import (MicroserviceCatalog, NodeSpec, Scenario, Solution,
                             Topology, UserSpec)
from edgeplace.latency import latency_table
from edgeplace.scenario import GenerationConfig, generate


def make_node(kind="scn", pos=(0.0, 0.0), storage=1000.0, compute=2.0,
              radius=350.0) -> NodeSpec:
    return NodeSpec(kind, np.array(pos, float), storage, compute, radius)


def unit_snr_gain(distance: float, power_mw: float = 1.0, alpha: float = 4.0) -> float:
    """Channel gain making p*D*d^-alpha equal exactly 1 (so rate = W)."""
    return max(distance, 1.0) ** alpha / power_mw


def hand_scenario(n_scn=2, storage=(1000.0, 1000.0), compute=(2.0, 2.0),
                  scn_bw=30.0, mcn_bw=10.0, backhaul=20.0, data=6.0,
                  services=(0, 0), demands=(0.5,), membership=((1, 1),),
                  layer_sizes=(100.0, 50.0), user_gain_snr=1.0,
                  link_scn=True) -> Scenario:
    """Small fully-pinned network: SCNs on the x-axis 100 m apart, MCN at the
    origin, one user per requested service sitting on SCN 0 (distance floored
    to 1 m), every uplink tuned to SNR = user_gain_snr."""
    nodes = tuple(
        make_node("scn", (100.0 * i, 0.0), storage[i], compute[i])
        for i in range(n_scn)
    ) + (make_node("mcn", (0.0, 0.0), 2250.0, 3.0, radius=1000.0),)
    n_nodes = n_scn + 1
    adjacency = np.zeros((n_nodes, n_nodes + 1), np.int8)
    np.fill_diagonal(adjacency[:, :n_nodes], 1)
    bw = np.zeros((n_nodes, n_nodes))
    if link_scn and n_scn >= 2:
        adjacency[0, 1] = adjacency[1, 0] = 1
        bw[0, 1] = bw[1, 0] = scn_bw
    adjacency[:n_scn, n_nodes - 1] = adjacency[n_nodes - 1, :n_scn] = 1
    bw[:n_scn, n_nodes - 1] = bw[n_nodes - 1, :n_scn] = mcn_bw
    adjacency[:, n_nodes] = adjacency[:, n_nodes - 1]
    adjacency[n_nodes - 1, n_nodes] = 1
    topology = Topology(adjacency, bw, backhaul)

    catalog = MicroserviceCatalog(np.array(layer_sizes, float),
                                  np.array(membership, np.int8),
                                  np.array(demands, float))
    users = []
    for svc in services:
        pos = np.zeros(2)  # on top of SCN 0 and the MCN: distance floor applies
        dists = np.linalg.norm(pos - np.stack([n.position for n in nodes]), axis=1)
        gains = np.array([user_gain_snr * unit_snr_gain(d) for d in dists])
        users.append(UserSpec(pos, svc, data, 1.0, gains))
    return Scenario(nodes=nodes, topology=topology, catalog=catalog,
                    users=tuple(users))


def all_cloud_solution(s: Scenario, lt=None) -> Solution:
    """Everyone executes on the cloud; access recovered from the argmin table."""
    lt = lt or latency_table(s)
    U, n_nodes, cloud = s.num_users, s.num_nodes, s.cloud_index
    w = np.zeros((U, n_nodes + 1), np.int8)
    w[:, cloud] = 1
    z = np.zeros((U, n_nodes), np.int8)
    for u in range(U):
        z[u, lt.zeta[u, cloud]] = 1
    return Solution(x=np.zeros((n_nodes, s.num_services), np.int8),
                    y=np.zeros((n_nodes, s.num_layers), np.int8), z=z, w=w)


TINY_CFG = GenerationConfig(num_scns=3, num_users=6, num_services=4,
                            num_layers=10, layers_per_service=(3, 6))


@pytest.fixture(scope="session")
def tiny_scenario() -> Scenario:
    return generate(TINY_CFG, seed=11)


@pytest.fixture(scope="session")
def tiny_table(tiny_scenario):
    return latency_table(tiny_scenario)


@pytest.fixture(scope="session")
def default_scenario() -> Scenario:
    return generate(GenerationConfig(), seed=42)
