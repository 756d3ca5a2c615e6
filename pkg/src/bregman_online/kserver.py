"""Online fractional (h,k)-server on trees by repeated Bregman projection."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import bregman
from .bregman import DivergenceParams, ProjectionResult, pdiv, potential, weighted_mass
from .polytope import PolytopeSpec, check_membership, shift_for
from .tree import WeightedTree, server_distance, to_server_vector, tree_norm

STRUCT_TOL = 1e-8


def initial_point(tree: WeightedTree, k: int, h: int, server_leaves: Sequence[int]) -> np.ndarray:
    """Starting anti-server point.

    Leaves hosting a server get ``delta``, the others share the remaining
    mass ``(n - h - k delta) / (n - k)``.  The root gets ``1[j > h]`` and each
    other internal node the sorted values of the leaves below it.
    """
    n = tree.n
    servers = [int(s) for s in server_leaves]
    if len(servers) != k:
        raise ValueError(f"expected {k} initial servers, got {len(servers)}")
    if len(set(servers)) != k:
        raise ValueError("duplicate initial server leaves")
    if not all(0 <= s < n for s in servers):
        raise ValueError("initial server leaf out of range")
    if k >= n:
        raise ValueError(f"k={k} >= n={n}: the starting point would need leaves below delta")
    delta = shift_for(k, h)
    leaf_vals = np.full(n, (n - h - k * delta) / (n - k))
    leaf_vals[servers] = delta
    x = np.empty(tree.N)
    for u in range(tree.num_nodes):
        vals = np.sort(leaf_vals[tree.leaf_lo[u]: tree.leaf_hi[u]])
        x[tree.atoms_of(u)] = vals
    x[tree.atoms_of(tree.root)] = (np.arange(1, n + 1) > h).astype(float)
    rep = check_membership(x, PolytopeSpec(tree, h, delta))
    if not rep.member:
        raise ValueError(f"starting point infeasible: {rep.violations[:3]}")
    return x


@dataclass
class StepRecord:
    step: int
    request: int
    movement: float            # ||x^t - x^{t-1}||_T
    positive_movement: float   # ||(x^t - x^{t-1})^+||_T
    server_movement: float     # d(z^t, z^{t-1})
    diagnostics: dict = field(default_factory=dict)
    audit: dict = field(default_factory=dict)
    potential_before: Optional[float] = None
    potential_after: Optional[float] = None

    def to_dict(self) -> dict:
        d = {
            "step": self.step,
            "request": self.request,
            "movement": self.movement,
            "positive_movement": self.positive_movement,
            "server_movement": self.server_movement,
            "diagnostics": self.diagnostics,
        }
        if self.audit:
            d["audit"] = self.audit
        if self.potential_before is not None:
            d["potential_before"] = self.potential_before
            d["potential_after"] = self.potential_after
        return d


class KServerState:
    """Mutable state of one (h,k)-server run.

    >>> from bregman_online.tree import star
    >>> st = KServerState(star([1, 1]), k=1, h=1, initial=[0])
    >>> rec = st.serve(1)
    >>> round(rec.movement, 12)
    0.666666666667
    """

    def __init__(self, tree: WeightedTree, k: int, h: int, initial: Sequence[int],
                 tol: float = bregman.TOL_FEAS):
        self.tree = tree
        self.k = k
        self.h = h
        self.spec = PolytopeSpec.from_kh(tree, k, h)
        self.delta = self.spec.delta
        self.params = DivergenceParams.for_tree(tree, self.delta)
        self.x = initial_point(tree, k, h, initial)
        self.x0 = self.x.copy()
        self.tol = tol
        self.last_request: Optional[int] = None
        self.t = 0
        self.total_movement = 0.0
        self.total_positive = 0.0
        self.total_server = 0.0
        self.last_result: Optional[ProjectionResult] = None

    def servers(self) -> np.ndarray:
        return to_server_vector(self.x, self.delta, self.tree)

    def serve(self, r: int) -> StepRecord:
        if not 0 <= r < self.tree.n:
            raise ValueError(f"request {r} is not a leaf number")
        prev = self.x
        res = bregman.project(prev, self.spec.with_request(r), self.params, tol=self.tol)
        diff = res.x - prev
        rec = StepRecord(
            step=self.t + 1,
            request=int(r),
            movement=tree_norm(diff, self.tree),
            positive_movement=tree_norm(np.maximum(diff, 0.0), self.tree),
            server_movement=server_distance(to_server_vector(res.x, self.delta, self.tree),
                                            to_server_vector(prev, self.delta, self.tree),
                                            self.tree),
            diagnostics=res.diagnostics(),
        )
        self.x = res.x
        self.last_result = res
        self.last_request = int(r)
        self.t += 1
        self.total_movement += rec.movement
        self.total_positive += rec.positive_movement
        self.total_server += rec.server_movement
        return rec


def init_state(tree: WeightedTree, k: int, h: int, initial_server_leaves) -> KServerState:
    return KServerState(tree, k, h, initial_server_leaves)


def serve(state: KServerState, r: int) -> StepRecord:
    return state.serve(r)


# -- structural checks --------------------------------------------------------------

def structural_residuals(x, tree: WeightedTree, h: int, delta: float,
                         request: Optional[int] = None) -> dict:
    """Worst deviations for root tightness, box, request/leaf bounds, slot
    monotonicity and per-level mass.  All are zero for an exact projection."""
    x = np.asarray(x)
    n = tree.n
    out = {}
    out["root_tight"] = float(np.max(np.abs(x[:n] - (np.arange(1, n + 1) > h))))
    out["box"] = float(max(0.0, -x.min(), x.max() - 1.0))
    leaf = x[tree.leaf_atoms]
    out["leaf_floor"] = float(max(0.0, delta - leaf.min()))
    out["request"] = 0.0 if request is None else float(abs(leaf[request] - delta))
    mono = 0.0
    for u in range(tree.num_nodes):
        vals = x[tree.atoms_of(u)]
        if len(vals) > 1:
            mono = max(mono, float(np.max(vals[:-1] - vals[1:])))
    out["monotone"] = max(0.0, mono)
    out["level_mass"] = float(max(abs(x[tree.level_atoms(d)].sum() - (n - h))
                                  for d in range(tree.D + 1)))
    flow = 0.0
    for u in tree.internal_nodes():
        flow = max(flow, abs(float(x[tree.atoms_of(u)].sum() - x[tree.child_atoms(u)].sum())))
    out["node_flow"] = flow
    return out


def flow_direction_violation(x_prev, x_new, tree: WeightedTree, request: int) -> float:
    """How far non-requested leaves decrease (or the request leaf increases)."""
    lp = np.asarray(x_prev)[tree.leaf_atoms]
    ln = np.asarray(x_new)[tree.leaf_atoms]
    d = ln - lp
    others = np.delete(d, request)
    return float(max(0.0, -others.min(initial=0.0), d[request]))


# -- audits ---------------------------------------------------------------------------

def opt_move_constant(delta: float) -> float:
    return (1 + delta) * math.log1p(1 / delta)


@dataclass
class AuditReport:
    checks: dict = field(default_factory=dict)   # name -> {"pass", "residual"} or {"skipped"}

    def add(self, name, residual, tol):
        self.checks[name] = {"pass": bool(residual <= tol), "residual": float(residual)}

    def skip(self, name, why):
        self.checks[name] = {"skipped": why}

    @property
    def passed(self) -> bool:
        return all(c.get("pass", True) for c in self.checks.values())

    def counts(self) -> tuple[int, int, int]:
        p = sum(1 for c in self.checks.values() if c.get("pass") is True)
        f = sum(1 for c in self.checks.values() if c.get("pass") is False)
        s = sum(1 for c in self.checks.values() if "skipped" in c)
        return p, f, s


def audit_step(prev_x, new_x, result: Optional[ProjectionResult], y_prev, y_new,
               tree: WeightedTree, delta: float, request: int,
               params: Optional[DivergenceParams] = None, tol: float = 1e-7) -> AuditReport:
    """Per-step accounting checks against a Boolean comparator ``y_prev -> y_new``.

    * ``opt_charge``: OPT's move raises the potential by at most
      ``(1+delta) log(1+1/delta)`` per unit of weighted ``(y_new - y_prev)^+``.
    * ``shadow``: ``P(x_new||x_prev) + Phi(y_new,x_new) - Phi(y_new,x_prev) <= 0``.
    * With a certificate: movement ``<= sum A``, the level identity
      ``sum_j B_{u,j} = sum_{chi_u} A``, the per-node charge-up bound, the
      root identity ``P(x_new||x_prev) = sum_j A_{r,j} - 2 delta gamma`` and
      the second lower bound ``D(y||x_prev) - D(y||x_new) >= delta gamma``.
    """
    params = params or DivergenceParams.for_tree(tree, delta)
    rep = AuditReport()
    prev_x = np.asarray(prev_x)
    new_x = np.asarray(new_x)
    w = tree.atom_weights

    dphi_opt = potential(y_new, prev_x, params) - potential(y_prev, prev_x, params)
    opt_cost = float(np.dot(w, np.maximum(np.asarray(y_new) - y_prev, 0.0)))
    rep.add("opt_charge", dphi_opt - opt_move_constant(delta) * opt_cost, tol)

    shadow = pdiv(new_x, prev_x, params)
    dphi_alg = potential(y_new, new_x, params) - potential(y_new, prev_x, params)
    rep.add("shadow", shadow + dphi_alg, tol)

    cert = None if result is None else result.certificate
    names = ("movement_vs_A", "level_identity", "charge_up", "root_identity", "second_bound")
    if cert is None:
        for nm in names:
            rep.skip(nm, "no certificate")
        return rep
    xt = new_x + params.shift
    a, b = cert.a_b(tree)
    A = xt * a
    B = xt * b
    diff = new_x - prev_x
    rep.add("movement_vs_A", float(np.dot(w, np.maximum(diff, 0.0)) - A.sum()), tol)
    lvl = 0.0
    charge = -np.inf
    for u in tree.internal_nodes():
        atoms = tree.atoms_of(u)
        lhs_b = B[atoms].sum()
        rhs_a = A[tree.child_atoms(u)].sum()
        lvl = max(lvl, abs(lhs_b - rhs_a) / (1.0 + abs(rhs_a)))
        du = diff[atoms].sum()
        charge = max(charge, rhs_a - (A[atoms].sum() - tree.weights[u] * du))
    rep.add("level_identity", lvl, 1e-6)
    rep.add("charge_up", charge, tol)
    root_atoms = tree.atoms_of(tree.root)
    root_id = shadow - (A[root_atoms].sum() - 2 * params.shift * cert.gamma)
    rep.add("root_identity", abs(root_id) / (1.0 + abs(shadow)), 1e-6)
    y = np.asarray(y_new)
    if y[tree.leaf_atoms[request]] == 0:
        drop = bregman.divergence(y, prev_x, params) - bregman.divergence(y, new_x, params)
        rep.add("second_bound", params.shift * cert.gamma - drop, tol)
    else:
        rep.skip("second_bound", "comparator does not cover the request")
    return rep


# -- whole runs -----------------------------------------------------------------------

@dataclass
class KServerTrace:
    tree: WeightedTree
    k: int
    h: int
    delta: float
    requests: list
    records: list
    x0: np.ndarray
    states: list                     # x^0, x^1, ..., x^T
    results: list
    total_movement: float = 0.0
    total_positive: float = 0.0
    total_server: float = 0.0


def run(tree: WeightedTree, k: int, h: int, initial: Sequence[int], requests: Sequence[int],
        tol: float = bregman.TOL_FEAS) -> KServerTrace:
    st = KServerState(tree, k, h, initial, tol=tol)
    states = [st.x.copy()]
    records = []
    results = []
    for r in requests:
        records.append(st.serve(int(r)))
        states.append(st.x.copy())
        results.append(st.last_result)
    return KServerTrace(tree, k, h, st.delta, [int(r) for r in requests], records, st.x0,
                        states, results, st.total_movement, st.total_positive, st.total_server)


def aggregate_bound(trace: KServerTrace, comparator: Sequence[np.ndarray]) -> dict:
    """Terms of the end-to-end movement bound against comparator encodings.

    ``comparator[t]`` is OPT's Boolean encoding after request ``t``
    (``comparator[0]`` is its start).  Returns the left side
    ``sum_t ||(dx)^+||_T``, the right side
    ``3(D+1) c OPT+ + 3(D+1)(Phi_0 - Phi_T) + D (W(x^0) - W(x^T))`` with
    ``c = (1+delta) log(1+1/delta)``, and the provable variant whose linear
    terms are kept exactly.
    """
    tree = trace.tree
    D = tree.D
    params = DivergenceParams.for_tree(tree, trace.delta)
    w = tree.atom_weights
    ys = [np.asarray(y, dtype=float) for y in comparator]
    opt_pos = sum(float(np.dot(w, np.maximum(ys[t] - ys[t - 1], 0.0))) for t in range(1, len(ys)))
    phi0 = potential(ys[0], trace.states[0], params)
    phiT = potential(ys[-1], trace.states[-1], params)
    W0 = weighted_mass(trace.states[0], params)
    WT = weighted_mass(trace.states[-1], params)
    c = opt_move_constant(trace.delta)
    lhs = sum(r.positive_movement for r in trace.records)
    rhs = 3 * (D + 1) * c * opt_pos + 3 * (D + 1) * (phi0 - phiT) + D * (W0 - WT)
    # exact bookkeeping of the depth-weighted mass terms
    nodes = [u for u in range(tree.num_nodes)
             if 1 <= tree.depth_of[u] <= D - 1]
    mass0 = np.array([trace.states[0][tree.atoms_of(u)].sum() for u in nodes])
    massT = np.array([trace.states[-1][tree.atoms_of(u)].sum() for u in nodes])
    R = float(sum((D - tree.depth_of[u]) * tree.weights[u] * (m0 - mT)
                  for u, m0, mT in zip(nodes, mass0, massT)))
    strict = 3 * (D + 1) * c * opt_pos + 3 * (D + 1) * (phi0 - phiT) + 2 * (D + 1) * (W0 - WT) + R
    return {"alg_positive": lhs, "opt_positive": opt_pos, "phi0": phi0, "phiT": phiT,
            "W0": W0, "WT": WT, "bound": rhs, "strict_bound": strict,
            "ratio_constant": 3 * (D + 1) * c}


def audit_run(trace: KServerTrace, comparator: Sequence[np.ndarray],
              tol: float = 1e-7) -> list[AuditReport]:
    """Run :func:`audit_step` on every step of ``trace``.

    ``comparator[t]`` is OPT's encoding after request ``t``; OPT's move into
    ``comparator[t]`` is charged before the algorithm's projection.
    """
    if len(comparator) != len(trace.states):
        raise ValueError("comparator needs one encoding per state")
    params = DivergenceParams.for_tree(trace.tree, trace.delta)
    reports = []
    for t, r in enumerate(trace.requests, start=1):
        reports.append(audit_step(trace.states[t - 1], trace.states[t], trace.results[t - 1],
                                  comparator[t - 1], comparator[t], trace.tree, trace.delta, r,
                                  params, tol))
    return reports


def uncrossing_audit(trace: KServerTrace, max_fanout: int = 6, tight_tol: float = 1e-10,
                     union_tol: float = 1e-7) -> list[tuple]:
    """Exhaustively look for tight sets whose union is not tight.

    Checks every internal node with at most ``max_fanout`` children at
    every state of the run.  Returns ``(step, node id, mask_a, mask_b)``
    counterexamples (empty when tight sets are union-closed).
    """
    from .polytope import uncrossing_violations

    tree = trace.tree
    nodes = [u for u in tree.internal_nodes() if len(tree.children[u]) <= max_fanout]
    bad = []
    for t, x in enumerate(trace.states):
        for u in nodes:
            for a, b in uncrossing_violations(x, tree, u, tight_tol, union_tol):
                bad.append((t, tree.ids[u], a, b))
    return bad
