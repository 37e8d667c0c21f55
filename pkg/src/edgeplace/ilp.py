"""Flattened binary-program form of the placement/assignment problem.

Decision vector v = [x, y, w]:
  x[n, i]  service i deployed on node n           ((N+1) * I entries)
  y[n, l]  layer l stored on node n               ((N+1) * L entries)
  w[u, m]  user u executes on m (cloud = last)    (U * (N+2) entries)

One equality row per user (its w entries sum to 1) and four inequality
blocks in fixed order: storage, layer-requirement, assignment-gating,
compute.  Coefficients that are structurally zero (a service not needing a
layer, an unreachable executor) are stored as explicit zeros so the row and
nonzero counts are functions of the dimensions alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .model import Scenario, Solution, check_feasible
from .latency import LatencyTable


@dataclass(frozen=True)
class VariableLayout:
    """Bijection between structured decisions and flat vector positions."""

    n_nodes: int     # N+1 (small cells + macro cell)
    n_services: int
    n_layers: int
    n_users: int

    @classmethod
    def from_scenario(cls, s: Scenario) -> "VariableLayout":
        return cls(s.num_nodes, s.num_services, s.num_layers, s.num_users)

    @property
    def n_executors(self) -> int:
        return self.n_nodes + 1  # plus cloud

    @property
    def x_size(self) -> int:
        return self.n_nodes * self.n_services

    @property
    def y_size(self) -> int:
        return self.n_nodes * self.n_layers

    @property
    def w_size(self) -> int:
        return self.n_users * self.n_executors

    @property
    def q(self) -> int:
        return self.x_size + self.y_size + self.w_size

    def x_index(self, n: int, i: int) -> int:
        return n * self.n_services + i

    def y_index(self, n: int, l: int) -> int:
        return self.x_size + n * self.n_layers + l

    def w_index(self, u: int, m: int) -> int:
        return self.x_size + self.y_size + u * self.n_executors + m

    @property
    def x_slice(self) -> slice:
        return slice(0, self.x_size)

    @property
    def y_slice(self) -> slice:
        return slice(self.x_size, self.x_size + self.y_size)

    @property
    def w_slice(self) -> slice:
        return slice(self.x_size + self.y_size, self.q)

    def pack(self, x: np.ndarray, y: np.ndarray, w: np.ndarray) -> np.ndarray:
        v = np.empty(self.q)
        v[self.x_slice] = np.asarray(x, float).reshape(-1)
        v[self.y_slice] = np.asarray(y, float).reshape(-1)
        v[self.w_slice] = np.asarray(w, float).reshape(-1)
        return v

    def unpack(self, v: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        x = np.asarray(v[self.x_slice]).reshape(self.n_nodes, self.n_services)
        y = np.asarray(v[self.y_slice]).reshape(self.n_nodes, self.n_layers)
        w = np.asarray(v[self.w_slice]).reshape(self.n_users, self.n_executors)
        return x, y, w


@dataclass(frozen=True)
class IlpInstance:
    """min f'v  s.t.  A1 v = g1,  A2 v <= g2,  v binary."""

    f: np.ndarray            # (q,)
    A1: sp.csr_matrix        # (U, q)
    g1: np.ndarray           # (U,)
    A2: sp.csr_matrix        # (R, q)
    g2: np.ndarray           # (R,)
    slack_dims: tuple[int, int, int, int]
    layout: VariableLayout
    reachable_w: np.ndarray  # (U, N+2) bool; False forces w[u,m] = 0

    @property
    def q(self) -> int:
        return self.layout.q

    @property
    def num_rows(self) -> int:
        return int(self.A2.shape[0])

    def row_blocks(self) -> dict[str, slice]:
        """Row ranges of the four inequality blocks, in assembly order."""
        a, b, c, d = self.slack_dims
        return {
            "storage": slice(0, a),
            "layer-requirement": slice(a, a + b),
            "assignment-gating": slice(a + b, a + b + c),
            "compute": slice(a + b + c, a + b + c + d),
        }


def build_ilp(s: Scenario, lt: LatencyTable) -> IlpInstance:
    """Assemble the flat instance from a scenario and its collapsed latencies."""
    lay = VariableLayout.from_scenario(s)
    n_nodes, n_srv, n_lay, n_usr = lay.n_nodes, lay.n_services, lay.n_layers, lay.n_users
    sizes = s.catalog.layer_sizes
    member = s.catalog.membership
    demand = s.catalog.compute_demand
    req = s.requested_services
    reachable = np.isfinite(lt.xi)

    # objective: collapsed latency on w entries, 0 on x and y; unreachable
    # pairs cost 0 because their gating row pins them to 0 anyway
    f = np.zeros(lay.q)
    xi = np.where(reachable, lt.xi, 0.0)
    f[lay.w_slice] = xi.reshape(-1)

    # equalities: each user picks exactly one executor
    rows = np.repeat(np.arange(n_usr), lay.n_executors)
    cols = np.arange(lay.w_slice.start, lay.w_slice.stop)
    A1 = sp.csr_matrix((np.ones(cols.size), (rows, cols)), shape=(n_usr, lay.q))
    g1 = np.ones(n_usr)

    data: list[float] = []
    rix: list[int] = []
    cix: list[int] = []
    rhs: list[float] = []
    row = 0

    # block 1: per-node storage cap over stored layers
    for n in range(n_nodes):
        for l in range(n_lay):
            rix.append(row)
            cix.append(lay.y_index(n, l))
            data.append(float(sizes[l]))
        rhs.append(s.nodes[n].storage)
        row += 1

    # block 2: H[i,l] * x[n,i] - y[n,l] <= 0 (deployment needs its layers)
    for n in range(n_nodes):
        for i in range(n_srv):
            for l in range(n_lay):
                rix.extend((row, row))
                cix.extend((lay.x_index(n, i), lay.y_index(n, l)))
                data.extend((float(member[i, l]), -1.0))
                rhs.append(0.0)
                row += 1

    # block 3: w[u,m] - x[m, service_u] <= 0 for edge executors; the x
    # coefficient is an explicit 0 where m is unreachable, pinning w to 0
    for u in range(n_usr):
        for m in range(n_nodes):
            coef = 1.0 if reachable[u, m] else 0.0
            rix.extend((row, row))
            cix.extend((lay.w_index(u, m), lay.x_index(m, req[u])))
            data.extend((1.0, -coef))
            rhs.append(0.0)
            row += 1

    # block 4: per-node compute cap over assigned tasks
    for n in range(n_nodes):
        for u in range(n_usr):
            rix.append(row)
            cix.append(lay.w_index(u, n))
            data.append(float(demand[req[u]]))
        rhs.append(s.nodes[n].compute)
        row += 1

    slack_dims = (n_nodes, n_nodes * n_srv * n_lay, n_usr * n_nodes, n_nodes)
    A2 = sp.csr_matrix((data, (rix, cix)), shape=(row, lay.q))
    g2 = np.array(rhs)
    return IlpInstance(f=f, A1=A1, g1=g1, A2=A2, g2=g2, slack_dims=slack_dims,
                       layout=lay, reachable_w=reachable)


@dataclass(frozen=True)
class EquivalenceReport:
    agree: bool
    matrix_feasible: bool
    validator_feasible: bool
    first_bad_row: int | None = None

    def __bool__(self) -> bool:
        return self.agree


# the constraints the flat matrices encode; access/routing constraints are
# absorbed by the latency collapse and live outside the matrix form
MATRIX_CHECKS = ("storage-capacity", "layer-prerequisite", "single-assignment",
                 "service-deployed", "compute-capacity")


def matrix_feasible(inst: IlpInstance, v: np.ndarray, tol: float = 1e-9) -> tuple[bool, int | None]:
    """Does binary v satisfy A1 v = g1 and A2 v <= g2?  Returns first bad row
    (equality rows count first) for diagnostics."""
    eq = np.abs(inst.A1 @ v - inst.g1)
    if np.any(eq > tol):
        return False, int(np.argmax(eq > tol))
    slack = inst.A2 @ v - inst.g2
    if np.any(slack > tol):
        return False, inst.g1.size + int(np.argmax(slack > tol))
    return True, None


def binary_check_equivalence(s: Scenario, sol: Solution, inst: IlpInstance) -> EquivalenceReport:
    """Cross-validate the assembly: the matrices must accept a binary point
    exactly when the direct validator accepts it on the matrix-covered
    constraints (plus the reachability pins encoded in the gating block)."""
    v = inst.layout.pack(sol.x, sol.y, sol.w)
    mat_ok, bad_row = matrix_feasible(inst, v)
    report = check_feasible(s, sol)
    by_name = {c.name: c.ok for c in report.checks}
    val_ok = all(by_name[name] for name in MATRIX_CHECKS)
    val_ok = val_ok and not np.any((np.asarray(sol.w) == 1) & ~inst.reachable_w)
    return EquivalenceReport(agree=mat_ok == val_ok, matrix_feasible=mat_ok,
                             validator_feasible=val_ok,
                             first_bad_row=None if mat_ok else bad_row)


def variable_names(lay: VariableLayout) -> list[str]:
    """Flat-position -> human name, matching the layout bijection."""
    names = [""] * lay.q
    for n in range(lay.n_nodes):
        for i in range(lay.n_services):
            names[lay.x_index(n, i)] = f"x_{n}_{i}"
        for l in range(lay.n_layers):
            names[lay.y_index(n, l)] = f"y_{n}_{l}"
    for u in range(lay.n_users):
        for m in range(lay.n_executors):
            names[lay.w_index(u, m)] = f"w_{u}_{m}"
    return names


def export_lp(inst: IlpInstance, path) -> None:
    """Write the instance in LP text format for external exact solvers."""
    names = variable_names(inst.layout)
    lines = ["Minimize"]
    terms = [f"+ {inst.f[j]!r} {names[j]}" for j in np.flatnonzero(inst.f)]
    lines.append(" obj: " + (" ".join(terms) if terms else "0 " + names[0]))
    lines.append("Subject To")
    for u in range(inst.g1.size):
        row = inst.A1.getrow(u)
        body = " ".join(f"+ {val!r} {names[j]}" for j, val in zip(row.indices, row.data))
        lines.append(f" assign_{u}: {body} = {inst.g1[u]!r}")
    for r in range(inst.num_rows):
        row = inst.A2.getrow(r)
        parts = []
        for j, val in zip(row.indices, row.data):
            sign = "+" if val >= 0 else "-"
            parts.append(f"{sign} {abs(val)!r} {names[j]}")
        if not parts:
            parts = [f"+ 0 {names[0]}"]
        lines.append(f" r_{r}: {' '.join(parts)} <= {inst.g2[r]!r}")
    lines.append("Binaries")
    for start in range(0, inst.layout.q, 8):
        lines.append(" " + " ".join(names[start:start + 8]))
    lines.append("End")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
