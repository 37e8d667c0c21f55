"""Scenario generation and serialization.

Generation is driven by a single numpy Generator with a documented draw
order, so that two configs differing only in a later block (or only in a
degenerate uniform range) produce scenarios that agree on everything drawn
before the difference.  Experiment sweeps rely on this pairing to compare
axis values under common random numbers.

Draw order:
  1. small-cell positions (one uniform batch for radii, one for angles)
  2. small-cell storage (one uniform batch)
  3. small-cell compute (one uniform batch)
  4. inter-cell link coin flips (one batch over all unordered pairs)
  5. inter-cell link bandwidths (one batch over all unordered pairs)
  6. cell-to-macro bandwidths (one batch)
  7. catalog: layer counts (+ adjustment draws), shared-slot spread
     permutation, pool layer sizes, per-image shared-byte fractions,
     per-service compute demands
  8. users, one user at a time: position radius, position angle, service,
     data size, fading vector

Scenario files use the versioned JSON format tag "edge-scenario/1" with
top-level sections: format, physics, nodes, topology, catalog, users.
All indices in the file are 0-based.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .model import (MicroserviceCatalog, NodeSpec, Scenario, ScenarioError,
                    Topology, UserSpec, validate_scenario)

FORMAT_TAG = "edge-scenario/1"


@dataclass(frozen=True)
class GenerationConfig:
    """Knobs for random scenario generation.  Ranges are inclusive uniform."""

    num_scns: int = 15
    num_users: int = 100
    num_services: int = 20
    num_layers: int = 116
    area_radius: float = 1000.0             # m; macro-cell coverage, placement disk
    scn_radius: float = 350.0               # m
    mcn_storage: float = 2250.0             # MB
    mcn_compute: float = 3.0                # GHz
    scn_storage: tuple[float, float] = (500.0, 1500.0)
    scn_compute: tuple[float, float] = (1.6, 2.4)
    layer_size: tuple[float, float] = (10.0, 400.0)       # MB
    layers_per_service: tuple[int, int] = (4, 8)
    shareable_fraction: tuple[float, float] = (0.12, 0.51)
    compute_demand: tuple[float, float] = (0.15, 0.45)    # GHz per running task
    data_size: tuple[float, float] = (5.0, 20.0)          # Mbit
    scn_link_scale: float = 500.0           # m; link prob = exp(-distance/scale)
    scn_scn_bandwidth: tuple[float, float] = (30.0, 45.0)  # Mbps
    scn_mcn_bandwidth: tuple[float, float] = (8.0, 12.0)
    backhaul_bandwidth: float = 20.0        # Mbps, macro cell -> cloud
    channel_bandwidth: float = 6.0          # MHz
    noise_power: float = 1.0                # mW
    path_loss_exponent: float = 4.0
    transmit_power_dbm: float = 23.0
    popularity_catalog: int = 1300          # ranked image registry size
    popularity_head: int = 263              # images holding head_mass of pulls
    popularity_head_mass: float = 0.90


def _validate_config(cfg: GenerationConfig) -> None:
    bad: list[str] = []
    if cfg.num_scns < 0 or cfg.num_users < 1:
        bad.append("small-cell count cannot be negative; need at least one user")
    if cfg.num_services < 2 or cfg.num_layers < 1:
        bad.append("need at least two services (layers are shared) and one layer")
    for name in ("scn_storage", "scn_compute", "layer_size", "shareable_fraction",
                 "compute_demand", "data_size", "scn_scn_bandwidth", "scn_mcn_bandwidth"):
        lo, hi = getattr(cfg, name)
        if not (0 < lo <= hi):
            bad.append(f"{name} must satisfy 0 < lo <= hi")
    lo, hi = cfg.layers_per_service
    if not (2 <= lo <= hi):
        bad.append("layers_per_service lower bound must be >= 2")
    if hi > cfg.num_layers:
        bad.append("a service cannot need more layers than exist")
    if not (0 < cfg.popularity_head <= cfg.popularity_catalog):
        bad.append("popularity head must lie within the catalog")
    if not (0 < cfg.popularity_head_mass < 1):
        bad.append("popularity head mass must be in (0, 1)")
    if bad:
        raise ScenarioError("; ".join(bad))


def fit_popularity(catalog_size: int, head_count: int, head_mass: float,
                   tol: float = 1e-12) -> float:
    """Zipf exponent s such that the top `head_count` of `catalog_size` ranks
    carry exactly `head_mass` of the total rank^-s weight.  Bisection; the
    head share is strictly increasing in s."""
    ranks = np.arange(1, catalog_size + 1, dtype=float)

    def head_share(s: float) -> float:
        weights = ranks ** (-s)
        return float(weights[:head_count].sum() / weights.sum())

    lo, hi = 0.0, 1.0
    while head_share(hi) < head_mass:
        hi *= 2.0
        if hi > 1e6:
            raise ValueError("head mass unreachable for this catalog split")
    if head_share(lo) >= head_mass:
        raise ValueError("head mass already met at exponent 0; nothing to fit")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if head_share(mid) < head_mass:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def popularity_weights(cfg: GenerationConfig) -> np.ndarray:
    """Request probabilities for the num_services most popular images."""
    s = fit_popularity(cfg.popularity_catalog, cfg.popularity_head,
                       cfg.popularity_head_mass)
    w = np.arange(1, cfg.num_services + 1, dtype=float) ** (-s)
    return w / w.sum()


def sample_requests(popularity: np.ndarray, num_users: int, num_services: int,
                    seed: int) -> np.ndarray:
    """Draw i.i.d. requested-service indices from the renormalized head of a
    ranked popularity vector (most popular rank first)."""
    w = np.asarray(popularity, float)
    if not 1 <= num_services <= w.size:
        raise ValueError("num_services must select a nonempty head of the ranking")
    if np.any(w[:num_services] < 0) or w[:num_services].sum() <= 0:
        raise ValueError("popularity head must have positive total mass")
    head = w[:num_services] / w[:num_services].sum()
    rng = np.random.default_rng(seed)
    return rng.choice(num_services, size=num_users, p=head)


def _build_catalog(cfg: GenerationConfig, rng: np.random.Generator) -> MicroserviceCatalog:
    """Construct exactly num_layers layers shared across num_services images.

    Each image gets n_i layer slots; k_i of them (1 <= k_i <= n_i // 2) point
    into a shared pool dealt cyclically so every pool layer is used by at
    least two images, the rest are private.  Private sizes are then set so
    the image's shared-byte fraction lands inside the configured window.
    """
    n_services, n_layers = cfg.num_services, cfg.num_layers
    lps_lo, lps_hi = cfg.layers_per_service
    counts = rng.integers(lps_lo, lps_hi + 1, size=n_services)

    # enough slots that every image can donate one shared slot and the pool
    # can still hold >= 1 layer used twice
    need = n_layers + (n_services + 1) // 2
    if lps_hi * n_services < need:
        raise ScenarioError("layer budget too tight: raise layers_per_service "
                            "or lower num_layers")
    spread_order = rng.permutation(n_services)

    def shared_split(cts: np.ndarray):
        """Smallest shared-slot allocation realizing exactly n_layers layers,
        or None.  Every image keeps >= 1 shared slot, at most half its slots
        are shared, and the pool must be large enough for distinct picks and
        small enough that every pool layer is picked twice."""
        total = int(cts.sum())
        caps = cts // 2
        k_min = max(n_services, total - n_layers + 1)
        k_max = min(2 * (total - n_layers), int(caps.sum()))
        for k_total in range(k_min, k_max + 1):
            trial = np.ones(n_services, dtype=int)
            extra = k_total - n_services
            i = 0
            while extra > 0:
                svc = spread_order[i % n_services]
                if trial[svc] < caps[svc]:
                    trial[svc] += 1
                    extra -= 1
                i += 1
            pool = n_layers - total + k_total
            if pool >= 1 and pool >= trial.max():
                return trial, pool
        return None

    split = None
    for _ in range(50 * n_services):
        if counts.sum() < need:
            room = np.flatnonzero(counts < lps_hi)
            if room.size == 0:
                break
            counts[rng.choice(room)] += 1
            continue
        split = shared_split(counts)
        if split is not None:
            break
        # slot total too high for the sharing caps: shrink somewhere
        room = np.flatnonzero(counts > lps_lo)
        if room.size == 0 or counts.sum() - 1 < need:
            break
        counts[rng.choice(room)] -= 1
    if split is None:
        raise ScenarioError("could not realize the exact layer count; adjust "
                            "num_layers / layers_per_service")
    shared, pool = split
    total = int(counts.sum())

    membership = np.zeros((n_services, n_layers), dtype=np.int8)
    ptr = 0
    for i in range(n_services):
        # consecutive cyclic picks give every pool layer >= 2 users
        for j in range(shared[i]):
            membership[i, (ptr + j) % pool] = 1
        ptr = (ptr + shared[i]) % pool
    privates = counts - shared
    nxt = pool
    for i in range(n_services):
        membership[i, nxt:nxt + privates[i]] = 1
        nxt += int(privates[i])
    if nxt != n_layers:
        raise AssertionError("layer accounting broke")

    size_lo, size_hi = cfg.layer_size
    sizes = np.empty(n_layers)
    sizes[:pool] = rng.uniform(size_lo, size_hi, size=pool)
    phi_lo, phi_hi = cfg.shareable_fraction
    nxt = pool
    for i in range(n_services):
        shared_bytes = float(membership[i, :pool].astype(float) @ sizes[:pool])
        p_i = int(privates[i])
        # fraction window reachable with p_i private layers inside size bounds
        w_lo = shared_bytes / (shared_bytes + size_hi * p_i)
        w_hi = shared_bytes / (shared_bytes + size_lo * p_i)
        a, b = max(phi_lo, w_lo), min(phi_hi, w_hi)
        if a > b:
            raise ScenarioError(f"shared-byte fraction window empty for image {i}")
        phi = rng.uniform(a, b)
        per_layer = shared_bytes * (1.0 - phi) / phi / p_i
        sizes[nxt:nxt + p_i] = per_layer
        nxt += p_i

    demand = rng.uniform(*cfg.compute_demand, size=n_services)
    return MicroserviceCatalog(sizes, membership, demand)


def generate(cfg: GenerationConfig, seed: int) -> Scenario:
    """Draw a full scenario; deterministic given (cfg, seed)."""
    _validate_config(cfg)
    rng = np.random.default_rng(seed)
    n_scn = cfg.num_scns
    mcn = n_scn  # macro cell is the last node

    radii = cfg.area_radius * np.sqrt(rng.random(n_scn))
    angles = 2.0 * np.pi * rng.random(n_scn)
    scn_pos = np.stack([radii * np.cos(angles), radii * np.sin(angles)], axis=1)
    storage = rng.uniform(*cfg.scn_storage, size=n_scn)
    compute = rng.uniform(*cfg.scn_compute, size=n_scn)

    n_nodes = n_scn + 1
    adjacency = np.zeros((n_nodes, n_nodes + 1), dtype=np.int8)
    adjacency[np.arange(n_nodes), np.arange(n_nodes)] = 1
    bandwidth = np.zeros((n_nodes, n_nodes))
    iu, ju = np.triu_indices(n_scn, k=1)
    dist = np.linalg.norm(scn_pos[iu] - scn_pos[ju], axis=1)
    flips = rng.random(iu.size)
    pair_bw = rng.uniform(*cfg.scn_scn_bandwidth, size=iu.size)
    linked = flips < np.exp(-dist / cfg.scn_link_scale)
    for a, b, on, bw in zip(iu, ju, linked, pair_bw):
        if on:
            adjacency[a, b] = adjacency[b, a] = 1
            bandwidth[a, b] = bandwidth[b, a] = bw
    mcn_bw = rng.uniform(*cfg.scn_mcn_bandwidth, size=n_scn)
    adjacency[:n_scn, mcn] = 1
    adjacency[mcn, :n_scn] = 1
    bandwidth[:n_scn, mcn] = mcn_bw
    bandwidth[mcn, :n_scn] = mcn_bw
    # cloud column: reachable wherever the macro cell is one hop away
    adjacency[:, n_nodes] = adjacency[:, mcn]
    adjacency[mcn, n_nodes] = 1
    topology = Topology(adjacency, bandwidth, cfg.backhaul_bandwidth)

    catalog = _build_catalog(cfg, rng)
    weights = popularity_weights(cfg)

    nodes = tuple(
        NodeSpec("scn", scn_pos[i], float(storage[i]), float(compute[i]), cfg.scn_radius)
        for i in range(n_scn)
    ) + (NodeSpec("mcn", np.zeros(2), cfg.mcn_storage, cfg.mcn_compute, cfg.area_radius),)

    power_mw = 10.0 ** (cfg.transmit_power_dbm / 10.0)
    # The channel power gain folds the unit-mean Rayleigh power fade together
    # with a fixed reference path gain of scn_radius^alpha, i.e. the noise
    # power is expressed relative to the signal received from the small-cell
    # coverage edge.  Raw metre distances with sigma^2 = 1 mW would put every
    # uplink microseconds-per-bit deep into the noise floor and latency would
    # be one giant access constant that no placement decision could touch.
    ref_gain = cfg.scn_radius ** cfg.path_loss_exponent
    users = []
    for _ in range(cfg.num_users):
        r = cfg.area_radius * np.sqrt(rng.random())
        theta = 2.0 * np.pi * rng.random()
        pos = np.array([r * np.cos(theta), r * np.sin(theta)])
        service = int(rng.choice(cfg.num_services, p=weights))
        data = float(rng.uniform(*cfg.data_size))
        fading = ref_gain * rng.exponential(1.0, size=n_nodes)
        users.append(UserSpec(pos, service, data, power_mw, fading))

    s = Scenario(nodes=nodes, topology=topology, catalog=catalog, users=tuple(users),
                 channel_bandwidth=cfg.channel_bandwidth, noise_power=cfg.noise_power,
                 path_loss_exponent=cfg.path_loss_exponent)
    problems = validate_scenario(s)
    if problems:
        raise ScenarioError("; ".join(problems))
    return s


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "format": FORMAT_TAG,
        "physics": {
            "channel_bandwidth_mhz": s.channel_bandwidth,
            "noise_power_mw": s.noise_power,
            "path_loss_exponent": s.path_loss_exponent,
        },
        "nodes": [
            {"kind": n.kind, "position": n.position.tolist(), "storage": n.storage,
             "compute": n.compute, "coverage_radius": n.coverage_radius}
            for n in s.nodes
        ],
        "topology": {
            "adjacency": s.topology.adjacency.tolist(),
            "link_bandwidth": s.topology.link_bandwidth.tolist(),
            "backhaul_bandwidth": s.topology.backhaul_bandwidth,
        },
        "catalog": {
            "layer_sizes": s.catalog.layer_sizes.tolist(),
            "membership": s.catalog.membership.tolist(),
            "compute_demand": s.catalog.compute_demand.tolist(),
        },
        "users": [
            {"position": u.position.tolist(), "service": u.service,
             "data_size": u.data_size, "transmit_power": u.transmit_power,
             "channel_gain": u.channel_gain.tolist()}
            for u in s.users
        ],
    }


def scenario_from_dict(doc: dict) -> Scenario:
    if doc.get("format") != FORMAT_TAG:
        raise ScenarioError(f"unsupported scenario format: {doc.get('format')!r}")
    try:
        phys = doc["physics"]
        nodes = tuple(
            NodeSpec(n["kind"], np.array(n["position"], float), float(n["storage"]),
                     float(n["compute"]), float(n["coverage_radius"]))
            for n in doc["nodes"]
        )
        topo = Topology(np.array(doc["topology"]["adjacency"], np.int8),
                        np.array(doc["topology"]["link_bandwidth"], float),
                        float(doc["topology"]["backhaul_bandwidth"]))
        cat = MicroserviceCatalog(np.array(doc["catalog"]["layer_sizes"], float),
                                  np.array(doc["catalog"]["membership"], np.int8),
                                  np.array(doc["catalog"]["compute_demand"], float))
        users = tuple(
            UserSpec(np.array(u["position"], float), int(u["service"]),
                     float(u["data_size"]), float(u["transmit_power"]),
                     np.array(u["channel_gain"], float))
            for u in doc["users"]
        )
        s = Scenario(nodes=nodes, topology=topo, catalog=cat, users=users,
                     channel_bandwidth=float(phys["channel_bandwidth_mhz"]),
                     noise_power=float(phys["noise_power_mw"]),
                     path_loss_exponent=float(phys["path_loss_exponent"]))
    except (KeyError, TypeError, IndexError) as exc:
        raise ScenarioError(f"malformed scenario document: {exc}") from exc
    problems = validate_scenario(s)
    if problems:
        raise ScenarioError("; ".join(problems))
    return s


def save_scenario(s: Scenario, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_dict(s), fh, indent=1)
        fh.write("\n")


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return scenario_from_dict(json.load(fh))
