#!/usr/bin/env python3
"""Walk through a generated edge network and its latency table.

Generates a small random scenario (small cells + one macro cell + cloud,
users with Rayleigh-faded uplinks), prints the node layout, then picks one
user and decomposes every access/executor latency: upload over the Shannon
rate, wired relay between linked nodes, and the backhaul hop to the cloud.
Ends with the access collapse: for each executor, only the best access node
matters, which is what lets the solver drop the access variables entirely.
"""

import numpy as np

from edgeplace.scenario import GenerationConfig, generate
from edgeplace.latency import latency_table, uplink_rate

np.set_printoptions(precision=3, suppress=True)

CFG = GenerationConfig(num_scns=4, num_users=6, num_services=3,
                       num_layers=8, layers_per_service=(2, 5))
SEED = 12


def describe_nodes(s):
    print(f"{s.num_scns} small cells + 1 macro cell, "
          f"{s.num_users} users, cloud behind a "
          f"{s.topology.backhaul_bandwidth:.0f} Mbps backhaul")
    for i, node in enumerate(s.nodes):
        print(f"  node {i} ({node.kind}): pos={node.position}, "
              f"storage={node.storage:.0f} MB, compute={node.compute:.2f} GHz, "
              f"radius={node.coverage_radius:.0f} m")
    print("wired links (node -> node, Mbps):")
    bw = s.topology.link_bandwidth
    for a in range(s.num_nodes):
        for b in range(a + 1, s.num_nodes):
            if bw[a, b] > 0:
                print(f"  {a} <-> {b}: {bw[a, b]:.0f}")


def decompose_user(s, lt, u):
    user = s.users[u]
    rates = uplink_rate(s)[u]
    print(f"\nuser {u}: pos={user.position}, wants service {user.service}, "
          f"uploads {user.data_size:.2f} Mbit")
    dists = [np.linalg.norm(user.position - n.position) for n in s.nodes]
    covered = [n for n, node in enumerate(s.nodes)
               if dists[n] <= node.coverage_radius]
    print(f"  covered by nodes {covered} "
          f"(distances {[f'{dists[n]:.0f}m' for n in covered]})")
    for n in covered:
        print(f"  via access {n} (uplink {rates[n]:.2f} Mbps):")
        for m in range(s.num_nodes + 1):
            t = lt.t[u, n, m]
            where = "cloud" if m == s.cloud_index else f"node {m}"
            if np.isinf(t):
                continue
            upload = user.data_size / rates[n]
            relay = t - upload
            extra = f" (+{relay:.3f}s relay)" if relay > 1e-12 else ""
            print(f"    execute on {where}: {t:.3f}s = "
                  f"{upload:.3f}s upload{extra}")


def show_access_collapse(s, lt, u):
    print(f"\naccess collapse for user {u}: best access per executor")
    for m in range(s.num_nodes + 1):
        where = "cloud" if m == s.cloud_index else f"node {m}"
        xi = lt.xi[u, m]
        if np.isinf(xi):
            print(f"  {where}: unreachable")
        else:
            print(f"  {where}: {xi:.3f}s through access {lt.zeta[u, m]}")
    print("the solver only ever needs xi (and recovers the access choice "
          "from zeta afterwards)")


def main():
    s = generate(CFG, SEED)
    lt = latency_table(s)
    describe_nodes(s)
    decompose_user(s, lt, u=0)
    show_access_collapse(s, lt, u=0)


if __name__ == "__main__":
    main()
