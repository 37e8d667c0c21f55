"""Sphere-box ADMM for the flattened binary program.

The binary set {0,1}^q is rewritten as the intersection of the box [0,1]^q
and the sphere centered at 1/2 with squared radius q/4; the relaxation
alternates box and sphere projections, a nonnegative slack update for the
inequality rows, a PCG solve of a positive-definite linear system for the
main iterate, and dual ascent.

`run` internally conditions the instance it is given: objective entries are
shifted per user by that user's smallest reachable cost (an exact objective
transformation wherever the per-user assignment rows hold) and
log-compressed, and inequality rows are equilibrated by their largest
coefficient.  The compression preserves each user's preference order;
reported objectives always use the caller's raw costs.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, cg

from .ilp import IlpInstance


class AdmmError(RuntimeError):
    pass


class PcgError(AdmmError):
    """Inner linear solve missed its tolerance within its iteration budget."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class DivergenceError(AdmmError):
    """Residual grew by 10x over a 50-iteration window."""

    def __init__(self, message: str, trace: dict):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class AdmmParams:
    """Penalties, dual step, and stopping/solver knobs.

    rho2 = 0 disables the sphere block entirely (plain box relaxation); the
    sphere penalty otherwise grows by rho2_growth every rho2_growth_every
    iterations to tighten the binary pull.  max_iters = None means "as many
    iterations as variables".
    """

    rho1: float = 5.0
    rho2: float = 5.0
    rho3: float = 5.0
    rho4: float = 5.0
    gamma: float = 1.0
    max_iters: int | None = None
    near_binary_tol: float = 0.02
    eq_tol: float = 0.05
    pcg_tol: float = 1e-8
    pcg_max_iters: int = 2000
    rho2_growth: float = 1.03
    rho2_growth_every: int = 50


def validate_params(p: AdmmParams) -> None:
    if p.rho1 <= 0 or p.rho3 <= 0 or p.rho4 <= 0:
        raise ValueError("rho1, rho3, rho4 must be positive")
    if p.rho2 < 0:
        raise ValueError("rho2 must be nonnegative (0 disables the sphere)")
    if not (0 < p.near_binary_tol < 0.5):
        raise ValueError("near_binary_tol must lie in (0, 0.5)")
    if p.gamma < 0 or p.eq_tol <= 0 or p.pcg_tol <= 0 or p.pcg_max_iters < 1:
        raise ValueError("gamma/eq_tol/pcg_tol/pcg_max_iters out of range")
    if p.rho2_growth < 1.0 or p.rho2_growth_every < 1:
        raise ValueError("rho2 growth must be >= 1 with a positive period")
    if p.max_iters is not None and p.max_iters < 1:
        raise ValueError("max_iters must be positive when given")


@dataclass
class AdmmState:
    v: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    h: np.ndarray
    k1: np.ndarray
    k2: np.ndarray
    k3: np.ndarray
    k4: np.ndarray
    iteration: int = 0


@dataclass
class AdmmResult:
    v: np.ndarray
    state: AdmmState
    iterations: int
    converged: bool
    objective: float
    trace: dict[str, np.ndarray] = field(default_factory=dict)


def project_box(p: np.ndarray) -> np.ndarray:
    """Componentwise clamp onto [0,1]^q."""
    return np.clip(p, 0.0, 1.0)


def project_sphere(p: np.ndarray) -> np.ndarray:
    """Radial projection onto the sphere ||u - 1/2||^2 = q/4.

    The sphere center itself has no radial direction; that singular input
    maps to the point offset along the first coordinate axis.
    """
    q = p.size
    center = 0.5
    radial = p - center
    norm = float(np.linalg.norm(radial))
    radius = 0.5 * np.sqrt(q)
    if norm == 0.0:
        out = np.full(q, center)
        out[0] += radius
        return out
    return center + (radius / norm) * radial


def update_slack(state: AdmmState, inst: IlpInstance) -> np.ndarray:
    """Nonnegative slack for the inequality rows at the current iterate."""
    return np.maximum(0.0, inst.g2 - inst.A2 @ state.v)


def _slack_with_dual(state: AdmmState, inst: IlpInstance, rho4: float) -> np.ndarray:
    """Slack minimizing the augmented term, dual included.

    Dropping the k4/rho4 shift makes the inequality residual nonnegative by
    construction, so those duals can only ratchet upward and eventually
    overwhelm the iterate; the shifted form lets duals on slack rows decay
    back to zero.
    """
    return np.maximum(0.0, inst.g2 - inst.A2 @ state.v - state.k4 / rho4)


class _OperatorCache:
    """Per-instance precomputations shared across iterations."""

    def __init__(self, inst: IlpInstance):
        self.A1 = inst.A1.tocsr()
        self.A2 = inst.A2.tocsr()
        self.A1T = self.A1.T.tocsr()
        self.A2T = self.A2.T.tocsr()
        self.col_sq1 = np.asarray(self.A1.multiply(self.A1).sum(axis=0)).ravel()
        self.col_sq2 = np.asarray(self.A2.multiply(self.A2).sum(axis=0)).ravel()
        self.A1T_g1 = self.A1T @ inst.g1


def system_operator(inst: IlpInstance, params: AdmmParams,
                    cache: _OperatorCache | None = None) -> tuple[LinearOperator, np.ndarray]:
    """Implicit (rho1+rho2) I + rho3 A1'A1 + rho4 A2'A2 and its diagonal."""
    c = cache or _OperatorCache(inst)
    r12 = params.rho1 + params.rho2
    r3, r4 = params.rho3, params.rho4

    def matvec(x: np.ndarray) -> np.ndarray:
        return r12 * x + r3 * (c.A1T @ (c.A1 @ x)) + r4 * (c.A2T @ (c.A2 @ x))

    q = inst.layout.q
    op = LinearOperator((q, q), matvec=matvec, dtype=float)
    diag = r12 + r3 * c.col_sq1 + r4 * c.col_sq2
    return op, diag


def solve_v(state: AdmmState, inst: IlpInstance, params: AdmmParams,
            cache: _OperatorCache | None = None,
            counter: list | None = None) -> np.ndarray:
    """Solve the positive-definite system for the next iterate via
    Jacobi-preconditioned CG, warm-started at the current iterate."""
    c = cache or _OperatorCache(inst)
    op, diag = system_operator(inst, params, c)
    b = (params.rho1 * state.e1 + params.rho2 * state.e2
         + params.rho3 * c.A1T_g1 + params.rho4 * (c.A2T @ (inst.g2 - state.h))
         - inst.f - state.k1 - state.k2 - c.A1T @ state.k3 - c.A2T @ state.k4)
    inv_diag = 1.0 / diag
    precond = LinearOperator(op.shape, matvec=lambda x: inv_diag * x, dtype=float)
    iters = [0]

    def tick(_):
        iters[0] += 1

    v, info = cg(op, b, x0=state.v, rtol=params.pcg_tol, atol=0.0,
                 maxiter=params.pcg_max_iters, M=precond, callback=tick)
    if counter is not None:
        counter.append(iters[0])
    if info != 0:
        resid = float(np.linalg.norm(b - op @ v))
        scale = float(np.linalg.norm(b)) or 1.0
        raise PcgError(f"inner solve stalled: relative residual {resid / scale:.3e} "
                       f"after {params.pcg_max_iters} iterations", resid / scale)
    return v


def update_duals(state: AdmmState, inst: IlpInstance,
                 params: AdmmParams) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Dual ascent; the step on the constraint duals is scaled by gamma."""
    k1 = state.k1 + params.rho1 * (state.v - state.e1)
    k2 = state.k2 + params.rho2 * (state.v - state.e2)
    k3 = state.k3 + params.gamma * params.rho3 * (inst.A1 @ state.v - inst.g1)
    k4 = state.k4 + params.gamma * params.rho4 * (inst.A2 @ state.v + state.h - inst.g2)
    return k1, k2, k3, k4


def near_binary_fraction(v: np.ndarray, tol: float = 0.02) -> float:
    """Fraction of entries within tol of 0 or 1."""
    return float(np.mean(np.minimum(np.abs(v), np.abs(v - 1.0)) <= tol))


def _condition_instance(inst: IlpInstance) -> IlpInstance:
    """Reshape the objective for solver health and equilibrate the
    inequality rows by their max |coefficient|.

    Raw per-task latencies span ten orders of magnitude (channel floors
    dominate), so the costs the solver sees are (a) shifted per user by that
    user's smallest reachable cost — an exact objective transformation
    wherever the per-user assignment rows hold — then (b) log-compressed.
    The compression is strictly monotone per user, so each user's executor
    preference order is untouched; only the cross-user weighting changes,
    and without it any cost difference much smaller than the largest spread
    falls below the solver's resolution.  Reported objectives always use the
    caller's raw costs."""
    f = inst.f.copy()
    lay = inst.layout
    w = f[lay.w_slice].reshape(lay.n_users, lay.n_executors)
    for u in range(lay.n_users):
        mask = inst.reachable_w[u]
        if mask.any():
            w[u, mask] -= w[u, mask].min()
    f[lay.w_slice] = np.log1p(w.reshape(-1))

    row_max = np.asarray(abs(inst.A2).max(axis=1).todense()).ravel()
    row_max[row_max == 0] = 1.0
    d = 1.0 / row_max
    A2 = (sp.diags(d) @ inst.A2).tocsr()
    g2 = d * inst.g2
    return dataclasses.replace(inst, f=f, A2=A2, g2=g2)


def _default_init(q: int) -> np.ndarray:
    # exact 1/2 * ones sits on the sphere projection's singular point; the
    # alternating nudge spreads the first sphere step evenly instead
    v = np.full(q, 0.5)
    v[1::2] -= 1e-6
    v[0::2] += 1e-6
    return v


def run(inst: IlpInstance, params: AdmmParams | None = None,
        init: np.ndarray | None = None) -> AdmmResult:
    """Iterate box/sphere projections, slack, linear solve, dual ascent.

    Stops when the iterate is within near_binary_tol of both auxiliaries
    (infinity norm) and the per-user assignment rows hold within eq_tol, or
    after max_iters (default: one iteration per variable).  Raises
    DivergenceError when the box gap grows 10x over a 50-iteration window
    while exceeding 1.0, and propagates PcgError from the inner solve.
    """
    params = params or AdmmParams()
    validate_params(params)
    raw_f = inst.f
    work = _condition_instance(inst)
    q = work.layout.q
    n_rows = work.g2.size

    v0 = np.array(init, float).copy() if init is not None else _default_init(q)
    if v0.shape != (q,):
        raise ValueError(f"init must have shape ({q},)")
    state = AdmmState(v=v0, e1=project_box(v0), e2=v0.copy(), h=np.zeros(n_rows),
                      k1=np.zeros(q), k2=np.zeros(q), k3=np.zeros(work.g1.size),
                      k4=np.zeros(n_rows))
    cache = _OperatorCache(work)
    max_iters = params.max_iters if params.max_iters is not None else q
    sphere_on = params.rho2 > 0

    box_gap: list[float] = []
    sphere_gap: list[float] = []
    eq_res: list[float] = []
    ineq_gap: list[float] = []
    objective: list[float] = []
    pcg_iters: list[int] = []
    cur = params
    converged = False
    it = 0

    for it in range(1, max_iters + 1):
        if sphere_on and params.rho2_growth > 1.0 and it > 1 \
                and (it - 1) % params.rho2_growth_every == 0:
            cur = dataclasses.replace(cur, rho2=cur.rho2 * params.rho2_growth)
        state.e1 = project_box(state.v + state.k1 / cur.rho1)
        if sphere_on:
            state.e2 = project_sphere(state.v + state.k2 / cur.rho2)
        state.h = _slack_with_dual(state, work, cur.rho4)
        state.v = solve_v(state, work, cur, cache, counter=pcg_iters)
        if sphere_on:
            state.k1, state.k2, state.k3, state.k4 = update_duals(state, work, cur)
        else:
            k1, _, k3, k4 = update_duals(state, work, cur)
            state.k1, state.k3, state.k4 = k1, k3, k4
        state.iteration = it

        bg = float(np.max(np.abs(state.v - state.e1)))
        sg = float(np.max(np.abs(state.v - state.e2))) if sphere_on else 0.0
        er = float(np.max(np.abs(work.A1 @ state.v - work.g1)))
        ig = float(np.max(np.maximum(0.0, work.A2 @ state.v - work.g2)))
        box_gap.append(bg)
        sphere_gap.append(sg)
        eq_res.append(er)
        ineq_gap.append(ig)
        objective.append(float(raw_f @ state.v))

        if max(bg, sg) <= cur.near_binary_tol and er <= cur.eq_tol:
            converged = True
            break
        if it > 50 and bg > 10.0 * box_gap[it - 51] and bg > 1.0:
            trace = _pack_trace(box_gap, sphere_gap, eq_res, ineq_gap, objective, pcg_iters)
            raise DivergenceError(
                f"box gap grew from {box_gap[it - 51]:.3e} to {bg:.3e} "
                f"over 50 iterations (iteration {it})", trace)

    trace = _pack_trace(box_gap, sphere_gap, eq_res, ineq_gap, objective, pcg_iters)
    return AdmmResult(v=state.v.copy(), state=state, iterations=it,
                      converged=converged, objective=float(raw_f @ state.v),
                      trace=trace)


def _pack_trace(box_gap, sphere_gap, eq_res, ineq_gap, objective, pcg_iters) -> dict[str, np.ndarray]:
    return {
        "box_gap": np.array(box_gap),
        "sphere_gap": np.array(sphere_gap),
        "eq_residual": np.array(eq_res),
        "ineq_violation": np.array(ineq_gap),
        "objective": np.array(objective),
        "pcg_iterations": np.array(pcg_iters, dtype=int),
    }
