"""Problem domain model: network scenario and candidate solutions.

Index conventions (0-based everywhere):
  nodes     0 .. N-1 are small-cell nodes, index N is the macro-cell node,
            column index N+1 (where it appears) is the remote cloud.
  services  0 .. I-1, layers 0 .. L-1, users 0 .. U-1.

A `Scenario` is immutable after construction; arrays are created with the
writeable flag cleared so accidental mutation fails loudly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


class ScenarioError(ValueError):
    """Scenario structure or parameter ranges are invalid."""


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(a)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class NodeSpec:
    """One serving node (small cell or macro cell)."""

    kind: str                 # "scn" or "mcn"
    position: np.ndarray      # (2,) metres
    storage: float            # MB available for image layers
    compute: float            # GHz available for task execution
    coverage_radius: float    # metres

    def __post_init__(self) -> None:
        object.__setattr__(self, "position", _frozen(np.asarray(self.position, float)))


@dataclass(frozen=True)
class Topology:
    """Wired side of the network.

    adjacency has one row per node and one column per node plus a trailing
    cloud column; entry 1 means a task can be routed there in one hop from
    the row node (diagonal is 1, cloud column is 1 only for the macro cell).
    """

    adjacency: np.ndarray          # (N+1, N+2) int8
    link_bandwidth: np.ndarray     # (N+1, N+1) Mbps, symmetric, diag 0
    backhaul_bandwidth: float      # Mbps, macro cell -> cloud

    def __post_init__(self) -> None:
        object.__setattr__(self, "adjacency", _frozen(np.asarray(self.adjacency, np.int8)))
        object.__setattr__(self, "link_bandwidth", _frozen(np.asarray(self.link_bandwidth, float)))


@dataclass(frozen=True)
class MicroserviceCatalog:
    """Service images decomposed into shareable layers."""

    layer_sizes: np.ndarray      # (L,) MB
    membership: np.ndarray       # (I, L) int8, 1 if service i needs layer l
    compute_demand: np.ndarray   # (I,) GHz consumed by one running task

    def __post_init__(self) -> None:
        object.__setattr__(self, "layer_sizes", _frozen(np.asarray(self.layer_sizes, float)))
        object.__setattr__(self, "membership", _frozen(np.asarray(self.membership, np.int8)))
        object.__setattr__(self, "compute_demand", _frozen(np.asarray(self.compute_demand, float)))

    @property
    def num_services(self) -> int:
        return self.membership.shape[0]

    @property
    def num_layers(self) -> int:
        return self.membership.shape[1]

    def image_size(self, service: int) -> float:
        """Total MB of the layers composing one service image."""
        return float(self.membership[service].astype(float) @ self.layer_sizes)


@dataclass(frozen=True)
class UserSpec:
    """One task-generating user."""

    position: np.ndarray       # (2,) metres
    service: int               # requested service index
    data_size: float           # Mbit of input to upload
    transmit_power: float      # mW
    channel_gain: np.ndarray   # (N+1,) channel power gain per node (fading x reference path gain)

    def __post_init__(self) -> None:
        object.__setattr__(self, "position", _frozen(np.asarray(self.position, float)))
        object.__setattr__(self, "channel_gain", _frozen(np.asarray(self.channel_gain, float)))


@dataclass(frozen=True)
class Scenario:
    """Complete immutable problem instance."""

    nodes: tuple[NodeSpec, ...]      # small cells first, macro cell last
    topology: Topology
    catalog: MicroserviceCatalog
    users: tuple[UserSpec, ...]
    channel_bandwidth: float = 6.0   # MHz per uplink
    noise_power: float = 1.0         # mW
    path_loss_exponent: float = 4.0

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_scns(self) -> int:
        return len(self.nodes) - 1

    @property
    def mcn_index(self) -> int:
        return len(self.nodes) - 1

    @property
    def cloud_index(self) -> int:
        """Column index of the cloud in executor-indexed arrays."""
        return len(self.nodes)

    @property
    def num_users(self) -> int:
        return len(self.users)

    @property
    def num_services(self) -> int:
        return self.catalog.num_services

    @property
    def num_layers(self) -> int:
        return self.catalog.num_layers

    @cached_property
    def node_positions(self) -> np.ndarray:
        return _frozen(np.stack([n.position for n in self.nodes]))

    @cached_property
    def user_positions(self) -> np.ndarray:
        return _frozen(np.stack([u.position for u in self.users]))

    @cached_property
    def requested_services(self) -> np.ndarray:
        return _frozen(np.array([u.service for u in self.users], dtype=int))


@dataclass
class Solution:
    """Candidate decision: deployment, access choice, assignment.

    x: (N+1, I) services deployed per node
    y: (N+1, L) layers stored per node
    z: (U, N+1) chosen access node per user
    w: (U, N+2) chosen executor per user (last column = cloud)
    """

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    w: np.ndarray
    objective: float | None = None
    meta: dict = field(default_factory=dict)

    def copy(self) -> "Solution":
        return Solution(self.x.copy(), self.y.copy(), self.z.copy(),
                        self.w.copy(), self.objective, dict(self.meta))


def coverage_matrix(s: Scenario) -> np.ndarray:
    """(U, N+1) 0/1 matrix: user u is within node n's coverage radius."""
    d = np.linalg.norm(s.user_positions[:, None, :] - s.node_positions[None, :, :], axis=2)
    radii = np.array([n.coverage_radius for n in s.nodes])
    return (d <= radii[None, :]).astype(np.int8)


def validate_scenario(s: Scenario) -> list[str]:
    """Describe every structural problem found; empty means well-formed.

    Report-based by design: callers that need hard failure wrap the result
    in a ScenarioError themselves.
    """
    problems: list[str] = []
    n_nodes = s.num_nodes
    adj = s.topology.adjacency

    if n_nodes < 1:
        problems.append("need at least one node")
    if s.nodes and s.nodes[-1].kind != "mcn":
        problems.append("last node must be the macro cell")
    if sum(1 for n in s.nodes if n.kind == "mcn") != 1:
        problems.append("exactly one macro cell required")
    for i, n in enumerate(s.nodes):
        if n.storage <= 0 or n.compute <= 0 or n.coverage_radius <= 0:
            problems.append(f"node {i}: storage/compute/radius must be positive")

    if adj.shape != (n_nodes, n_nodes + 1):
        problems.append(f"adjacency shape {adj.shape} != {(n_nodes, n_nodes + 1)}")
    else:
        core = adj[:, :n_nodes]
        if not np.array_equal(core, core.T):
            problems.append("adjacency (node block) must be symmetric")
        if not np.all(np.diag(core) == 1):
            problems.append("adjacency diagonal must be 1")
        # cloud is reachable from a node iff the node is (or links to) the macro cell
        cloud_col = adj[:, n_nodes]
        expect = core[:, s.mcn_index].copy()
        expect[s.mcn_index] = 1
        if not np.array_equal(cloud_col, expect):
            problems.append("cloud column must mark exactly the nodes with a macro-cell link")
    bw = s.topology.link_bandwidth
    if bw.shape != (n_nodes, n_nodes):
        problems.append(f"link_bandwidth shape {bw.shape} != {(n_nodes, n_nodes)}")
    elif not np.array_equal(bw, bw.T):
        problems.append("link_bandwidth must be symmetric")
    elif adj.shape == (n_nodes, n_nodes + 1):
        off = adj[:, :n_nodes].astype(bool) & ~np.eye(n_nodes, dtype=bool)
        if np.any(bw[off] <= 0):
            problems.append("linked node pairs need positive bandwidth")
    if s.topology.backhaul_bandwidth <= 0:
        problems.append("backhaul bandwidth must be positive")

    cat = s.catalog
    if np.any(cat.layer_sizes <= 0):
        problems.append("layer sizes must be positive")
    if cat.membership.shape != (cat.num_services, cat.num_layers):
        problems.append("membership shape mismatch")
    if np.any(cat.membership.sum(axis=1) < 1):
        problems.append("every service needs at least one layer")
    if np.any(cat.membership.sum(axis=0) < 1):
        problems.append("every layer must belong to some service")
    if cat.compute_demand.shape != (cat.num_services,):
        problems.append("compute_demand shape mismatch")
    elif np.any(cat.compute_demand <= 0):
        problems.append("compute demands must be positive")

    for ui, u in enumerate(s.users):
        if not (0 <= u.service < cat.num_services):
            problems.append(f"user {ui}: service index {u.service} out of range")
        if u.data_size <= 0 or u.transmit_power <= 0:
            problems.append(f"user {ui}: data size and power must be positive")
        if u.channel_gain.shape != (n_nodes,):
            problems.append(f"user {ui}: channel_gain shape mismatch")

    if s.users and not problems:
        cov = coverage_matrix(s)
        orphan = np.flatnonzero(cov.sum(axis=1) == 0)
        if orphan.size:
            problems.append(f"users outside all coverage: {orphan.tolist()}")

    if s.channel_bandwidth <= 0 or s.noise_power <= 0 or s.path_loss_exponent <= 0:
        problems.append("physics constants must be positive")

    return problems


@dataclass(frozen=True)
class ConstraintCheck:
    name: str
    ok: bool
    violations: int = 0
    first: tuple | None = None


@dataclass(frozen=True)
class FeasibilityReport:
    checks: tuple[ConstraintCheck, ...]

    @property
    def feasible(self) -> bool:
        return all(c.ok for c in self.checks)

    def failed(self) -> list[str]:
        return [c.name for c in self.checks if not c.ok]

    def __str__(self) -> str:
        parts = [f"{c.name}: {'ok' if c.ok else f'{c.violations} violation(s), first at {c.first}'}"
                 for c in self.checks]
        return "\n".join(parts)


def _check(name: str, bad_mask: np.ndarray) -> ConstraintCheck:
    bad = np.argwhere(bad_mask)
    if bad.size == 0:
        return ConstraintCheck(name, True)
    return ConstraintCheck(name, False, len(bad), tuple(int(v) for v in bad[0]))


def check_feasible(s: Scenario, sol: Solution) -> FeasibilityReport:
    """Check every hard constraint; never raises, reports all outcomes."""
    cat = s.catalog
    x = np.asarray(sol.x, int)
    y = np.asarray(sol.y, int)
    z = np.asarray(sol.z, int)
    w = np.asarray(sol.w, int)
    n_nodes, cloud = s.num_nodes, s.cloud_index
    req = s.requested_services
    cov = coverage_matrix(s)
    checks = []

    used = (y.astype(float) @ cat.layer_sizes)
    caps = np.array([n.storage for n in s.nodes])
    checks.append(_check("storage-capacity", used > caps + 1e-9))

    # deploying service i on node n requires every layer of i present there
    need = x @ cat.membership        # (N+1, L) counts of services needing l
    checks.append(_check("layer-prerequisite", (need > 0) & (y == 0)))

    checks.append(_check("access-coverage", (z == 1) & (cov == 0)))
    checks.append(_check("single-access", z.sum(axis=1) != 1))
    checks.append(_check("single-assignment", w.sum(axis=1) != 1))

    # edge executor must have the user's service deployed; cloud hosts all
    deployed = np.concatenate([x[:, req].T, np.ones((s.num_users, 1), int)], axis=1)
    checks.append(_check("service-deployed", (w == 1) & (deployed == 0)))

    demand = cat.compute_demand[req]                     # (U,)
    load = w[:, :n_nodes].T.astype(float) @ demand       # (N+1,)
    comp = np.array([n.compute for n in s.nodes])
    checks.append(_check("compute-capacity", load > comp + 1e-9))

    # executor must be one hop from the chosen access node (cloud via column)
    reach = z @ s.topology.adjacency                     # (U, N+2), 0/1 rows
    checks.append(_check("route-adjacency", (w == 1) & (reach == 0)))

    return FeasibilityReport(tuple(checks))


def evaluate_objective(s: Scenario, table, sol: Solution) -> float:
    """Total latency sum_u t[u, access_u, executor_u] for a complete solution.

    Raises ValueError naming the first (user, access, executor) triple whose
    latency is the unreachable sentinel; a routed-through-nowhere solution
    must never silently score as a huge-but-finite cost.
    """
    t = table.t
    acc = np.argmax(sol.z, axis=1)
    exe = np.argmax(sol.w, axis=1)
    total = 0.0
    for u in range(s.num_users):
        term = t[u, acc[u], exe[u]]
        if not np.isfinite(term):
            raise ValueError(f"unreachable route selected: user {u} via node "
                             f"{acc[u]} to executor {exe[u]}")
        total += term
    return float(total)
