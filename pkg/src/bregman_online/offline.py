"""Exact offline optima for small instances.

These are the comparators for the online algorithms: the cheapest
trajectory of an ``h``-server (or ``h``-page) adversary that serves every
request, and the smallest hitting set for set cover.  All solvers are
exhaustive or LP-based and meant for desk-sized inputs.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix

from .tree import WeightedTree, encode_integer, leaf_distance_matrix, server_distance

DP_MAX_LEAVES = 10
DP_MAX_SERVERS = 4
DP_MAX_STEPS = 1000
FLOW_MAX_SERVERS = 3
FLOW_MAX_STEPS = 200
SETCOVER_MAX_SETS = 16


class OracleLimitError(ValueError):
    """Instance too large for the exact oracle."""


@dataclass
class OfflineSolution:
    """Configurations ``configs[0]`` (start) .. ``configs[T]`` and their cost."""

    kind: str
    configs: list
    cost: float
    step_costs: list = field(default_factory=list)
    method: str = ""

    def to_dict(self) -> dict:
        return {"kind": self.kind, "method": self.method, "cost": self.cost,
                "step_costs": list(self.step_costs),
                "configs": [list(map(int, c)) for c in self.configs]}


# -- k-server on trees ------------------------------------------------------------

def _start_configs(configs, initial, h):
    init = set(int(i) for i in initial)
    if len(init) >= h:
        return np.array([set(c) <= init for c in configs])
    return np.array([init <= set(c) for c in configs])


def matching_costs(configs: np.ndarray, dist: np.ndarray) -> np.ndarray:
    """Min-cost perfect matching between every pair of configurations,
    by enumerating the ``h!`` assignments."""
    h = configs.shape[1]
    best = None
    for perm in itertools.permutations(range(h)):
        c = np.zeros((len(configs), len(configs)))
        for i, j in enumerate(perm):
            c += dist[configs[:, i][:, None], configs[:, j][None, :]]
        best = c if best is None else np.minimum(best, c)
    return best


def kserver_cost(configs: Sequence, tree: WeightedTree) -> list[float]:
    """Per-step movement cost of a configuration sequence (re-simulation)."""
    out = []
    for a, b in zip(configs[:-1], configs[1:]):
        za = np.bincount(np.asarray(a, dtype=int), minlength=tree.n)
        zb = np.bincount(np.asarray(b, dtype=int), minlength=tree.n)
        out.append(server_distance(za, zb, tree))
    return out


def _check_kserver_input(tree, h, sequence, initial):
    seq = [int(r) for r in sequence]
    if any(not 0 <= r < tree.n for r in seq):
        raise ValueError("request out of range")
    if h < 1 or h > tree.n:
        raise ValueError(f"h={h} outside [1, n]")
    if len(set(int(i) for i in initial)) != len(list(initial)):
        raise ValueError("duplicate initial leaves")
    return seq


def opt_kserver(tree: WeightedTree, h: int, sequence: Sequence[int], initial_leaves: Sequence[int],
                method: str = "auto") -> OfflineSolution:
    """Cheapest ``h``-server trajectory serving ``sequence`` (leaf numbers).

    The adversary may start from any ``h`` of ``initial_leaves`` (or any
    superset of them when fewer than ``h`` are given).  ``method`` is
    ``"dp"``, ``"flow"`` or ``"auto"`` (DP when the instance fits).
    """
    seq = _check_kserver_input(tree, h, sequence, initial_leaves)
    fits_dp = tree.n <= DP_MAX_LEAVES and h <= DP_MAX_SERVERS and len(seq) <= DP_MAX_STEPS
    if method == "auto":
        method = "dp" if fits_dp else "flow"
    if method == "dp":
        if not fits_dp:
            raise OracleLimitError(f"DP needs n <= {DP_MAX_LEAVES}, h <= {DP_MAX_SERVERS}, "
                                   f"T <= {DP_MAX_STEPS}")
        return _kserver_dp(tree, h, seq, initial_leaves)
    if method == "flow":
        return kserver_flow(tree, h, seq, initial_leaves)
    raise ValueError(f"unknown method {method!r}")


def _kserver_dp(tree, h, seq, initial):
    configs = np.array(list(itertools.combinations(range(tree.n), h)), dtype=int)
    move = matching_costs(configs, leaf_distance_matrix(tree))
    value = np.where(_start_configs(configs, initial, h), 0.0, np.inf)
    if not np.isfinite(value).any():
        raise ValueError("no valid start configuration")
    back = []
    for r in seq:
        total = value[:, None] + move
        arg = np.argmin(total, axis=0)
        value = total[arg, np.arange(len(configs))]
        value[~np.any(configs == r, axis=1)] = np.inf
        back.append(arg)
    idx = int(np.argmin(value))
    path = [idx]
    for arg in reversed(back):
        path.append(int(arg[path[-1]]))
    path.reverse()
    cfgs = [tuple(int(v) for v in configs[i]) for i in path]
    steps = kserver_cost(cfgs, tree)
    return OfflineSolution("kserver", cfgs, float(value[idx]), steps, "dp")


def kserver_flow(tree: WeightedTree, h: int, sequence: Sequence[int],
                 initial_leaves: Sequence[int]) -> OfflineSolution:
    """Time-expanded min-cost flow, solved as an LP.

    ``h`` units leave a source through the initial leaves; between
    consecutive requests each unit moves along a complete leaf graph with
    tree distances; after step ``t`` at least one unit sits at ``r_t``.
    The constraint matrix is a network matrix, so the LP optimum is
    integral.
    """
    seq = _check_kserver_input(tree, h, sequence, initial_leaves)
    if h > FLOW_MAX_SERVERS or len(seq) > FLOW_MAX_STEPS:
        raise OracleLimitError(f"flow oracle needs h <= {FLOW_MAX_SERVERS}, T <= {FLOW_MAX_STEPS}")
    n, T = tree.n, len(seq)
    init = sorted(set(int(i) for i in initial_leaves))
    if T == 0:
        start = tuple(init[:h]) if len(init) >= h else tuple(sorted(init + [i for i in range(n) if i not in init][: h - len(init)]))
        return OfflineSolution("kserver", [start], 0.0, [], "flow")
    dist = leaf_distance_matrix(tree)
    # variables: s_i (n), then f_t[i, j] for t = 1..T
    nv = n + T * n * n

    def fvar(t, i, j):
        return n + (t - 1) * n * n + i * n + j

    rows, cols, vals = [], [], []
    b_eq = []
    r = 0
    for i in range(n):                            # out of layer 0 equals s_i
        for j in range(n):
            rows.append(r); cols.append(fvar(1, i, j)); vals.append(1.0)
        rows.append(r); cols.append(i); vals.append(-1.0)
        b_eq.append(0.0)
        r += 1
    for t in range(2, T + 1):                     # conservation at layer t-1
        for i in range(n):
            for j in range(n):
                rows.append(r); cols.append(fvar(t, i, j)); vals.append(1.0)
                rows.append(r); cols.append(fvar(t - 1, j, i)); vals.append(-1.0)
            b_eq.append(0.0)
            r += 1
    for i in range(n):
        rows.append(r); cols.append(i); vals.append(1.0)
    b_eq.append(float(h))
    r += 1
    A_eq = coo_matrix((vals, (rows, cols)), shape=(r, nv)).tocsr()
    ub_rows, ub_cols = [], []
    for t, req in enumerate(seq, start=1):       # -inflow(r_t) <= -1
        for i in range(n):
            ub_rows.append(t - 1); ub_cols.append(fvar(t, i, req))
    A_ub = coo_matrix((-np.ones(len(ub_rows)), (ub_rows, ub_cols)), shape=(T, nv)).tocsr()
    c = np.concatenate([np.zeros(n), np.tile(dist.ravel(), T)])
    if len(init) >= h:
        s_bounds = [(0.0, 1.0) if i in init else (0.0, 0.0) for i in range(n)]
    else:
        s_bounds = [(1.0, 1.0) if i in init else (0.0, 1.0) for i in range(n)]
    bounds = s_bounds + [(0.0, None)] * (T * n * n)
    res = linprog(c, A_ub=A_ub, b_ub=-np.ones(T), A_eq=A_eq, b_eq=np.array(b_eq),
                  bounds=bounds, method="highs")
    if res.status != 0:
        raise RuntimeError(f"flow LP failed: {res.message}")
    x = res.x
    s = x[:n]
    flows = x[n:].reshape(T, n, n)
    layers = [s] + [flows[t].sum(axis=0) for t in range(T)]
    cfgs = []
    for m in layers:
        mi = np.rint(m)
        if np.abs(m - mi).max() > 1e-6:
            raise RuntimeError("flow LP returned a fractional vertex")
        cfgs.append(tuple(int(i) for i in np.repeat(np.arange(n), mi.astype(int))))
    steps = kserver_cost(cfgs, tree)
    return OfflineSolution("kserver", cfgs, float(sum(steps)), steps, "flow")


def kserver_comparator(solution: OfflineSolution, tree: WeightedTree, h: int) -> list[np.ndarray]:
    """Boolean anti-server encodings of an offline k-server trajectory."""
    return [encode_integer(c, tree, h) for c in solution.configs]


# -- weighted paging ----------------------------------------------------------------

def paging_cost(configs: Sequence, weights) -> list[float]:
    """Eviction-payment cost of a cache sequence."""
    w = np.asarray(weights, dtype=float)
    return [float(sum(w[i] for i in set(a) - set(b))) for a, b in zip(configs[:-1], configs[1:])]


def opt_paging(weights, h: int, sequence: Sequence[int], initial: Sequence[int]) -> OfflineSolution:
    """Cheapest cache trajectory with ``h`` slots that pays ``w_i`` to evict ``i``.

    Loading is free, so the adversary starts from any ``h`` pages of
    ``initial`` (or any superset of ``initial`` when it has fewer than
    ``h`` pages).
    """
    w = np.asarray(weights, dtype=float)
    n = len(w)
    seq = [int(r) for r in sequence]
    if n > DP_MAX_LEAVES:
        raise OracleLimitError(f"paging DP needs n <= {DP_MAX_LEAVES}")
    if len(seq) > DP_MAX_STEPS:
        raise OracleLimitError(f"paging DP needs T <= {DP_MAX_STEPS}")
    if not 1 <= h <= n:
        raise ValueError(f"h={h} outside [1, n]")
    if any(not 0 <= r < n for r in seq):
        raise ValueError("request out of range")
    configs = list(itertools.combinations(range(n), h))
    member = np.zeros((len(configs), n))
    for c, cfg in enumerate(configs):
        member[c, list(cfg)] = 1.0
    evict = (member * w) @ (1.0 - member).T          # [prev, new]
    value = np.where(_start_configs(configs, initial, h), 0.0, np.inf)
    if not np.isfinite(value).any():
        raise ValueError("no valid start cache")
    back = []
    for r in seq:
        total = value[:, None] + evict
        arg = np.argmin(total, axis=0)
        value = total[arg, np.arange(len(configs))]
        value[member[:, r] == 0] = np.inf
        back.append(arg)
    idx = int(np.argmin(value))
    path = [idx]
    for arg in reversed(back):
        path.append(int(arg[path[-1]]))
    path.reverse()
    cfgs = [configs[i] for i in path]
    steps = paging_cost(cfgs, w)
    return OfflineSolution("paging", cfgs, float(value[idx]), steps, "dp")


def paging_comparator(solution: OfflineSolution, n: int) -> list[np.ndarray]:
    """``b^t = 1 - indicator(cache_t)``."""
    out = []
    for c in solution.configs:
        b = np.ones(n)
        b[list(c)] = 0.0
        out.append(b)
    return out


# -- set cover -------------------------------------------------------------------

def _row_masks(rows, n):
    masks = []
    for row in rows:
        row = np.asarray(row)
        if row.shape != (n,) or not np.isin(row, (0, 1)).all():
            raise ValueError("set cover rows must be 0/1 vectors of equal length")
        if not row.any():
            raise ValueError("all-zero row cannot be covered")
        masks.append(int(sum(1 << i for i in np.flatnonzero(row))))
    return masks


def opt_setcover(rows: Sequence, n: Optional[int] = None) -> OfflineSolution:
    """Minimum hitting set by enumerating all ``2^n`` subsets.

    ``configs`` holds the single optimal set (ties: smallest bitmask).
    """
    rows = [np.asarray(r) for r in rows]
    if n is None:
        if not rows:
            raise ValueError("n is required when there are no rows")
        n = len(rows[0])
    if n > SETCOVER_MAX_SETS:
        raise OracleLimitError(f"exhaustive set cover needs n <= {SETCOVER_MAX_SETS}")
    rmasks = _row_masks(rows, n)
    cand = np.arange(1 << n, dtype=np.int64)
    ok = np.ones(len(cand), dtype=bool)
    for m in set(rmasks):
        ok &= (cand & m) != 0
    sizes = np.bitwise_count(cand)
    sizes = np.where(ok, sizes, n + 1)
    best = int(np.argmin(sizes))
    chosen = tuple(i for i in range(n) if best >> i & 1)
    return OfflineSolution("setcover", [chosen], float(len(chosen)), [], "exhaustive")


def monotone_comparator(rows: Sequence, chosen: Sequence[int], n: int) -> list[np.ndarray]:
    """Grow ``b`` online: when row ``t`` is uncovered, add its smallest set
    from ``chosen``.  Returns ``b^0 .. b^T``; the final ``b`` equals
    ``chosen`` whenever ``chosen`` is a minimum cover."""
    chosen = sorted(int(i) for i in chosen)
    b = np.zeros(n)
    out = [b.copy()]
    for row in rows:
        row = np.asarray(row, dtype=float)
        if row @ b < 1.0:
            hit = [i for i in chosen if row[i] > 0]
            if not hit:
                raise ValueError("chosen sets do not cover every row")
            b[hit[0]] = 1.0
        out.append(b.copy())
    return out
