"""Vertex-weighted rooted trees with uniform leaf depth, and their atoms.

Every node ``u`` owns ``|L_u|`` atoms ``(u, 1), ..., (u, |L_u|)`` where
``L_u`` is the set of leaves below ``u``.  Atoms are laid out in one flat
vector: nodes in DFS preorder (children visited in sorted-id order), and
slots within a node in increasing ``j``.  With all leaves at depth ``D``
there are exactly ``n`` atoms per level, so ``N = n (D + 1)``.
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

PAD_WEIGHT_FACTOR = 1e-12


class TreeError(ValueError):
    """Malformed tree input."""


@dataclass(frozen=True, eq=False)
class WeightedTree:
    """Immutable rooted tree.  Build it with :func:`build_tree`.

    Arrays are indexed by node position (DFS preorder).  ``ids[i]`` gives
    the opaque string id of node ``i``; ``index[id]`` inverts it.
    """

    ids: tuple[str, ...]
    parent: np.ndarray          # parent position, -1 for the root
    weights: np.ndarray
    depth_of: np.ndarray
    children: tuple[tuple[int, ...], ...]
    leaf_count: np.ndarray      # |L_u|
    leaf_lo: np.ndarray         # leaves of T_u are leaves[leaf_lo[u]:leaf_hi[u]]
    leaf_hi: np.ndarray
    leaves: np.ndarray          # node positions of the leaves, in DFS order
    atom_offset: np.ndarray     # first atom of node u
    index: Mapping[str, int] = field(repr=False)
    padded: tuple[str, ...] = ()

    # -- sizes -----------------------------------------------------------
    @property
    def num_nodes(self) -> int:
        return len(self.ids)

    @property
    def n(self) -> int:
        return len(self.leaves)

    @property
    def D(self) -> int:
        return int(self.depth_of[self.leaves[0]])

    @property
    def N(self) -> int:
        return int(self.atom_offset[-1])

    @property
    def root(self) -> int:
        return 0

    # -- atoms -----------------------------------------------------------
    def atom(self, u: int | str, j: int) -> int:
        """Flat index of atom ``(u, j)``, with 1-based slot ``j``."""
        if isinstance(u, str):
            u = self.index[u]
        if not 1 <= j <= self.leaf_count[u]:
            raise IndexError(f"slot {j} out of range for node {self.ids[u]}")
        return int(self.atom_offset[u] + j - 1)

    def atoms_of(self, u: int) -> np.ndarray:
        return np.arange(self.atom_offset[u], self.atom_offset[u + 1])

    def child_atoms(self, u: int) -> np.ndarray:
        """Atom indices of ``chi_u`` (all atoms of all children of ``u``)."""
        parts = [self.atoms_of(v) for v in self.children[u]]
        return np.concatenate(parts) if parts else np.zeros(0, dtype=int)

    @property
    def atom_weights(self) -> np.ndarray:
        return np.repeat(self.weights, self.leaf_count)

    @property
    def atom_node(self) -> np.ndarray:
        return np.repeat(np.arange(self.num_nodes), self.leaf_count)

    @property
    def atom_slot(self) -> np.ndarray:
        return np.concatenate([np.arange(1, c + 1) for c in self.leaf_count])

    @property
    def leaf_atoms(self) -> np.ndarray:
        return self.atom_offset[self.leaves]

    def is_leaf(self, u: int) -> bool:
        return not self.children[u]

    def level(self, d: int) -> np.ndarray:
        """Node positions at depth ``d`` (``V_d``)."""
        return np.flatnonzero(self.depth_of == d)

    def level_atoms(self, d: int) -> np.ndarray:
        return np.concatenate([self.atoms_of(u) for u in self.level(d)])

    def internal_nodes(self) -> list[int]:
        return [u for u in range(self.num_nodes) if self.children[u]]

    def leaf_position(self, leaf: int | str) -> int:
        """Position of a leaf within ``leaves`` (0-based leaf number)."""
        if isinstance(leaf, str):
            leaf = self.index[leaf]
        pos = np.flatnonzero(self.leaves == leaf)
        if len(pos) != 1:
            raise TreeError(f"{self.ids[leaf]!r} is not a leaf")
        return int(pos[0])

    def leaf_ids(self) -> list[str]:
        return [self.ids[u] for u in self.leaves]

    # -- serialization ---------------------------------------------------
    def to_records(self) -> list[dict]:
        order = sorted(range(self.num_nodes), key=lambda u: self.ids[u])
        return [
            {
                "id": self.ids[u],
                "parent": None if self.parent[u] < 0 else self.ids[self.parent[u]],
                "weight": float(self.weights[u]),
            }
            for u in order
        ]

    def to_json(self) -> str:
        return json.dumps({"nodes": self.to_records()}, sort_keys=True)


def _normalize_records(node_records) -> list[dict]:
    if isinstance(node_records, Mapping) and "nodes" in node_records:
        node_records = node_records["nodes"]
    out = []
    for rec in node_records:
        if isinstance(rec, Mapping):
            out.append({"id": str(rec["id"]),
                        "parent": None if rec.get("parent") is None else str(rec["parent"]),
                        "weight": float(rec["weight"])})
        else:
            nid, par, w = rec
            out.append({"id": str(nid),
                        "parent": None if par is None else str(par),
                        "weight": float(w)})
    return out


def build_tree(node_records, pad: bool = True) -> WeightedTree:
    """Validate node records and build a :class:`WeightedTree`.

    ``node_records`` is either the tree JSON object ``{"nodes": [...]}``, a
    list of ``{"id", "parent", "weight"}`` dicts, or ``(id, parent, weight)``
    tuples.  Shallow leaves are pushed down to the common depth by inserting
    a chain of padding nodes between the leaf and its parent, each with
    weight ``1e-12 * min positive weight``.
    """
    recs = _normalize_records(node_records)
    if not recs:
        raise TreeError("empty tree")
    ids = [r["id"] for r in recs]
    dup = [k for k, c in Counter(ids).items() if c > 1]
    if dup:
        raise TreeError(f"duplicate node ids: {dup}")
    by_id = {r["id"]: r for r in recs}
    roots = [r["id"] for r in recs if r["parent"] is None]
    if len(roots) != 1:
        raise TreeError(f"expected exactly one root, found {len(roots)}")
    for r in recs:
        if not np.isfinite(r["weight"]) or r["weight"] < 0:
            raise TreeError(f"negative or non-finite weight at {r['id']!r}")
        if r["parent"] is not None and r["parent"] not in by_id:
            raise TreeError(f"unknown parent {r['parent']!r} of {r['id']!r}")

    kids: dict[str, list[str]] = {i: [] for i in ids}
    for r in recs:
        if r["parent"] is not None:
            kids[r["parent"]].append(r["id"])

    # reachability from the root doubles as the cycle check
    root = roots[0]
    seen = {root}
    stack = [root]
    while stack:
        u = stack.pop()
        for v in kids[u]:
            if v in seen:
                raise TreeError("cycle detected")
            seen.add(v)
            stack.append(v)
    if len(seen) != len(ids):
        raise TreeError("cycle detected (nodes unreachable from the root)")

    positive = [r["weight"] for r in recs if r["weight"] > 0]
    eps = PAD_WEIGHT_FACTOR * (min(positive) if positive else 1.0)
    weight = {i: (by_id[i]["weight"] if by_id[i]["weight"] > 0 else eps) for i in ids}
    parent = {i: by_id[i]["parent"] for i in ids}

    def depths() -> dict[str, int]:
        d = {root: 0}
        stack = [root]
        while stack:
            u = stack.pop()
            for v in kids[u]:
                d[v] = d[u] + 1
                stack.append(v)
        return d

    dep = depths()
    leaves = [i for i in kids if not kids[i]]
    D = max(dep[l] for l in leaves)
    padded = []
    if pad:
        for leaf in sorted(leaves):
            missing = D - dep[leaf]
            if missing == 0:
                continue
            above = parent[leaf]
            for m in range(missing):
                pid = f"{leaf}~pad{m}"
                while pid in weight:
                    pid += "'"
                weight[pid] = eps
                kids[pid] = []
                parent[pid] = above
                if above is not None:
                    kids[above].append(pid)
                above = pid
                padded.append(pid)
            if parent[leaf] is not None:
                kids[parent[leaf]].remove(leaf)
            parent[leaf] = above
            kids[above].append(leaf)
        dep = depths()
    elif any(dep[l] != D for l in leaves):
        raise TreeError("leaves are not all at the same depth")

    order: list[str] = []
    stack = [root]
    while stack:
        u = stack.pop()
        order.append(u)
        stack.extend(sorted(kids[u], reverse=True))
    pos = {u: i for i, u in enumerate(order)}
    m = len(order)
    par = np.array([-1 if parent[u] is None else pos[parent[u]] for u in order], dtype=int)
    children = tuple(tuple(pos[v] for v in sorted(kids[u])) for u in order)
    depth_of = np.array([dep[u] for u in order], dtype=int)

    leaf_pos = [i for i in range(m) if not children[i]]
    rank = {u: r for r, u in enumerate(leaf_pos)}
    lo = np.zeros(m, dtype=int)
    hi = np.zeros(m, dtype=int)
    for i in reversed(range(m)):
        if not children[i]:
            lo[i], hi[i] = rank[i], rank[i] + 1
        else:
            lo[i] = min(lo[c] for c in children[i])
            hi[i] = max(hi[c] for c in children[i])
    count = hi - lo
    offset = np.concatenate([[0], np.cumsum(count)])

    return WeightedTree(
        ids=tuple(order),
        parent=par,
        weights=np.array([weight[u] for u in order], dtype=float),
        depth_of=depth_of,
        children=children,
        leaf_count=count,
        leaf_lo=lo,
        leaf_hi=hi,
        leaves=np.array(leaf_pos, dtype=int),
        atom_offset=offset,
        index=pos,
        padded=tuple(padded),
    )


def tree_from_json(text: str) -> WeightedTree:
    return build_tree(json.loads(text))


def star(weights: Sequence[float], root_weight: float = 1.0) -> WeightedTree:
    """Depth-one tree whose leaves ``"0", "1", ...`` carry ``weights``."""
    width = len(str(len(weights) - 1))
    recs = [("r", None, root_weight)]
    recs += [(f"{i:0{width}d}", "r", w) for i, w in enumerate(weights)]
    return build_tree(recs)


# -- norms and distances ------------------------------------------------------

def tree_norm(v, tree: WeightedTree) -> float:
    """Weighted l1 norm ``sum_u w_u sum_j |v_{u,j}|`` over all atoms."""
    v = np.asarray(v, dtype=float)
    if v.shape != (tree.N,):
        raise ValueError(f"expected a vector of {tree.N} atoms, got shape {v.shape}")
    return float(np.dot(tree.atom_weights, np.abs(v)))


def subtree_sums(leaf_values, tree: WeightedTree) -> np.ndarray:
    """Per-node sums of a leaf-indexed vector over the leaves of ``T_u``."""
    z = np.asarray(leaf_values, dtype=float)
    if z.shape != (tree.n,):
        raise ValueError(f"expected {tree.n} leaf values, got shape {z.shape}")
    csum = np.concatenate([[0.0], np.cumsum(z)])
    return csum[tree.leaf_hi] - csum[tree.leaf_lo]


def server_distance(z, z_other, tree: WeightedTree) -> float:
    """``sum_u w_u |z(T_u) - z'(T_u)|`` for leaf-indexed server vectors."""
    diff = subtree_sums(z, tree) - subtree_sums(z_other, tree)
    return float(np.dot(tree.weights, np.abs(diff)))


def leaf_distance_matrix(tree: WeightedTree) -> np.ndarray:
    """Pairwise leaf distances: sum of weights on the path, lca excluded.

    This agrees with :func:`server_distance` for a single server moving
    between two leaves.
    """
    n = tree.n
    out = np.zeros((n, n))
    anc = []
    for leaf in tree.leaves:
        path = []
        u = int(leaf)
        while u >= 0:
            path.append(u)
            u = int(tree.parent[u])
        anc.append(path)
    for a in range(n):
        pa = anc[a]
        for b in range(a + 1, n):
            sb = set(anc[b])
            da = 0.0
            for u in pa:
                if u in sb:
                    lca = u
                    break
                da += tree.weights[u]
            db = 0.0
            for u in anc[b]:
                if u == lca:
                    break
                db += tree.weights[u]
            out[a, b] = out[b, a] = da + db
    return out


# -- server <-> anti-server translation ----------------------------------------

def to_server_vector(x, delta: float, tree: WeightedTree) -> np.ndarray:
    """Leaf server amounts ``z_l = (1 - x_{l,1}) / (1 - delta)``.

    Internal-node values are the subtree sums, see :func:`subtree_sums`.
    """
    if not delta < 1:
        raise ValueError("delta must be < 1")
    x = np.asarray(x, dtype=float)
    return (1.0 - x[tree.leaf_atoms]) / (1.0 - delta)


def encode_integer(server_leaves: Iterable, tree: WeightedTree, h: int | None = None) -> np.ndarray:
    """Boolean anti-server encoding of an integer server placement.

    ``y_{u,j} = 0`` iff ``T_u`` holds at least ``j`` servers.  Leaves may be
    given by id or leaf number (0-based position in ``tree.leaves``) and may
    repeat.  When ``h`` is given the placement must use at most ``h``
    servers, otherwise it cannot lie in the polytope for that ``h``.
    """
    counts = np.zeros(tree.n)
    total = 0
    for leaf in server_leaves:
        p = tree.leaf_position(leaf) if isinstance(leaf, str) else int(leaf)
        if not 0 <= p < tree.n:
            raise TreeError(f"leaf number {p} out of range")
        counts[p] += 1
        total += 1
    if h is not None and total > h:
        raise ValueError(f"{total} servers exceed h={h}")
    sub = subtree_sums(counts, tree)
    y = np.ones(tree.N)
    slots = tree.atom_slot
    y[slots <= np.repeat(sub, tree.leaf_count)] = 0.0
    return y


# -- depth reduction -----------------------------------------------------------

def reduce_depth(tree: WeightedTree) -> WeightedTree:
    """Contract heavy internal edges so each internal edge at least halves ``|L|``.

    Working top-down, whenever an internal child ``v`` of ``u`` has
    ``|L_v| > |L_u| / 2`` the edge ``(u, v)`` is contracted; ``v``'s children
    move to ``u`` and the merged node keeps ``u``'s weight.  Leaf edges are
    never contracted.  Padding from the input is removed first and the
    result is re-padded to uniform depth.
    """
    pad = {tree.index[p] for p in tree.padded}
    kids = {u: list(tree.children[u]) for u in range(tree.num_nodes)}
    for p in sorted(pad, key=lambda u: -tree.depth_of[u]):
        q = int(tree.parent[p])
        kids[q].remove(p)
        kids[q].extend(kids.pop(p))
    count = tree.leaf_count

    stack = [tree.root]
    while stack:
        u = stack.pop()
        while True:
            internal = [v for v in kids[u] if kids[v]]
            if not internal:
                break
            v = max(internal, key=lambda c: (count[c], -c))
            if count[v] * 2 <= count[u]:
                break
            kids[u].remove(v)
            kids[u].extend(kids.pop(v))
        stack.extend(kids[u])

    recs = [(tree.ids[tree.root], None, float(tree.weights[tree.root]))]
    stack = [tree.root]
    while stack:
        u = stack.pop()
        for c in kids[u]:
            recs.append((tree.ids[c], tree.ids[u], float(tree.weights[c])))
            stack.append(c)
    return build_tree(recs)
