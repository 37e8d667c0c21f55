"""Latency model: wireless uplink plus wired relay per (user, access, executor).

All rates are Mbps against Mbit payloads, so every latency is in seconds.
Unreachable combinations carry +inf, the documented sentinel; downstream code
must treat inf as "no route", never as a large cost.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Scenario, coverage_matrix


def uplink_rate(s: Scenario) -> np.ndarray:
    """(U, N+1) achievable uplink rate in Mbps; 0 where the node gives no coverage.

    rate = W * log2(1 + p * D * max(d, 1m)^-alpha / sigma^2)
    with W in MHz, p in mW, sigma^2 in mW and d in metres.
    """
    d = np.linalg.norm(s.user_positions[:, None, :] - s.node_positions[None, :, :], axis=2)
    d = np.maximum(d, 1.0)  # near-field floor
    power = np.array([u.transmit_power for u in s.users])[:, None]
    gain = np.stack([u.channel_gain for u in s.users])
    snr = power * gain * d ** (-s.path_loss_exponent) / s.noise_power
    rate = s.channel_bandwidth * np.log2(1.0 + snr)
    return rate * coverage_matrix(s)


@dataclass(frozen=True)
class LatencyTable:
    """t[u, n, m]: latency of user u accessing node n, executing at m.

    m ranges over nodes plus a trailing cloud column. xi[u, m] is the access
    choice collapsed out (min over n), zeta[u, m] the minimizing access node
    (-1 where xi is inf).
    """

    t: np.ndarray     # (U, N+1, N+2) seconds
    xi: np.ndarray    # (U, N+2) seconds
    zeta: np.ndarray  # (U, N+2) int


def latency_table(s: Scenario) -> LatencyTable:
    """Build the full latency tensor and its access-collapsed reduction."""
    n_nodes, n_users = s.num_nodes, s.num_users
    mcn = s.mcn_index
    rate = uplink_rate(s)
    data = np.array([u.data_size for u in s.users])           # Mbit
    adj = s.topology.adjacency
    bw = s.topology.link_bandwidth

    with np.errstate(divide="ignore"):
        up = np.where(rate > 0, data[:, None] / rate, np.inf)  # (U, N+1)

    t = np.full((n_users, n_nodes, n_nodes + 1), np.inf)
    for n in range(n_nodes):
        # executing at the access node itself: upload only
        t[:, n, n] = up[:, n]
        # one-hop relay to a linked edge node
        for m in range(n_nodes):
            if m != n and adj[n, m] == 1 and bw[n, m] > 0:
                t[:, n, m] = up[:, n] + data / bw[n, m]
        # cloud: through the macro cell, then over the backhaul
        if n == mcn:
            t[:, n, n_nodes] = up[:, n] + data / s.topology.backhaul_bandwidth
        elif adj[n, mcn] == 1 and bw[n, mcn] > 0:
            t[:, n, n_nodes] = up[:, n] + data / bw[n, mcn] + data / s.topology.backhaul_bandwidth

    xi, zeta = reduce_access(t)
    return LatencyTable(t=t, xi=xi, zeta=zeta)


def reduce_access(t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Collapse the access dimension: xi[u,m] = min_n t[u,n,m], zeta = argmin.

    Ties break to the lowest node index; zeta is -1 where no access node
    reaches executor m at all.
    """
    xi = t.min(axis=1)
    zeta = t.argmin(axis=1).astype(int)
    zeta[~np.isfinite(xi)] = -1
    return xi, zeta
