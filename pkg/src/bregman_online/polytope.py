"""Anti-server polytope ``P``, its shifted version ``P_delta`` and ``P_t``.

``P`` lives on the atoms of a :class:`~bregman_online.tree.WeightedTree`:

* box: ``0 <= x <= 1``;
* root bounds: ``x_{r,j} >= 1 if j > h else 0``;
* subset constraints: for every internal ``u`` and ``S`` in ``chi_u``,
  ``sum_{j <= |S|} x_{u,j} <= sum_{(v,l) in S} x_{v,l}``.

For a fixed size ``s`` the right-hand side is smallest when ``S`` holds the
``s`` smallest child atoms, so checking those ``|chi_u|`` canonical sets per
node decides all ``2^|chi_u|`` constraints.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .tree import WeightedTree

DEFAULT_TOL = 1e-9


def shift_for(k: int, h: int) -> float:
    """``delta = (k - h + 1/2) / (k + 1/2)``."""
    return (k - h + 0.5) / (k + 0.5)


@dataclass(frozen=True)
class PolytopeSpec:
    tree: WeightedTree
    h: int
    delta: float
    request: Optional[int] = None      # leaf number (0-based) of r_t

    def __post_init__(self):
        if not 0 <= self.h <= self.tree.n:
            raise ValueError(f"h={self.h} outside [0, n={self.tree.n}]")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")

    @classmethod
    def from_kh(cls, tree: WeightedTree, k: int, h: int, request=None) -> "PolytopeSpec":
        if not 1 <= h <= k <= tree.n:
            raise ValueError(f"need 1 <= h <= k <= n, got h={h}, k={k}, n={tree.n}")
        return cls(tree, h, shift_for(k, h), request)

    def with_request(self, request: Optional[int]) -> "PolytopeSpec":
        return PolytopeSpec(self.tree, self.h, self.delta, request)

    def root_bounds(self) -> np.ndarray:
        j = np.arange(1, self.tree.n + 1)
        return (j > self.h).astype(float)

    @property
    def request_atom(self) -> Optional[int]:
        if self.request is None:
            return None
        return int(self.tree.leaf_atoms[self.request])


# -- constraint records --------------------------------------------------------

@dataclass(frozen=True)
class SubsetConstraint:
    """``sum_{j <= |S|} x_{u,j} <= x(S)`` for ``S`` a set of child atoms of ``u``."""

    node: int
    atoms: tuple[int, ...]

    @property
    def size(self) -> int:
        return len(self.atoms)

    def slack(self, x, tree: WeightedTree) -> float:
        x = np.asarray(x)
        lhs = x[tree.atom_offset[self.node]: tree.atom_offset[self.node] + self.size].sum()
        return float(x[list(self.atoms)].sum() - lhs)

    def row(self, tree: WeightedTree) -> tuple[np.ndarray, float]:
        c = np.zeros(tree.N)
        c[tree.atom_offset[self.node]: tree.atom_offset[self.node] + self.size] = 1.0
        c[list(self.atoms)] -= 1.0
        return c, 0.0


@dataclass(frozen=True)
class RootBound:
    """``x_{r,j} >= value``."""

    slot: int
    value: float

    def row(self, tree: WeightedTree) -> tuple[np.ndarray, float]:
        c = np.zeros(tree.N)
        c[tree.atom(tree.root, self.slot)] = -1.0
        return c, -self.value


@dataclass(frozen=True)
class RequestCap:
    """``x_{r_t,1} <= delta``."""

    atom: int
    delta: float

    def row(self, tree: WeightedTree) -> tuple[np.ndarray, float]:
        c = np.zeros(tree.N)
        c[self.atom] = 1.0
        return c, self.delta


@dataclass(frozen=True)
class BoxViolation:
    atom: int
    bound: str        # "lower" | "upper" | "shift"
    amount: float


# -- membership -----------------------------------------------------------------

def _check_shape(x, tree):
    x = np.asarray(x, dtype=float)
    if x.shape != (tree.N,):
        raise ValueError(f"expected {tree.N} atoms, got shape {x.shape}")
    return x


def canonical_slacks(x, tree: WeightedTree, u: int) -> tuple[np.ndarray, np.ndarray]:
    """Slacks of the canonical size-1..|chi_u| constraints at node ``u``.

    Returns ``(slack, order)`` where ``order`` lists the child atoms sorted by
    value (ties by atom index), so the size-``s`` canonical set is
    ``order[:s]``.
    """
    ch = tree.child_atoms(u)
    vals = x[ch]
    perm = np.lexsort((ch, vals))
    order = ch[perm]
    rhs = np.cumsum(vals[perm])
    lhs = np.cumsum(x[tree.atoms_of(u)])
    return rhs - lhs, order


@dataclass
class MembershipReport:
    member: bool
    worst: dict = field(default_factory=dict)        # family -> most negative slack
    violations: list = field(default_factory=list)   # (family, where, slack)

    def to_dict(self) -> dict:
        return {"member": self.member,
                "worst": {k: float(v) for k, v in self.worst.items()},
                "violations": [[f, w, float(s)] for f, w, s in self.violations]}


def check_membership(x, spec: PolytopeSpec, tol: float = DEFAULT_TOL,
                     shifted: bool = True) -> MembershipReport:
    """Check ``x`` against ``P`` (and ``P_delta`` when ``shifted``), plus the
    request cap when ``spec.request`` is set.  Report only; never raises on
    infeasibility."""
    tree = spec.tree
    x = _check_shape(x, tree)
    rep = MembershipReport(True)

    def note(family, where, slack):
        rep.worst[family] = min(rep.worst.get(family, np.inf), slack)
        if slack < -tol:
            rep.member = False
            rep.violations.append((family, where, slack))

    for a in range(tree.N):
        note("box", f"atom {a} lower", x[a])
        note("box", f"atom {a} upper", 1.0 - x[a])
    bounds = spec.root_bounds()
    for j in range(tree.n):
        note("root", f"slot {j + 1}", x[j] - bounds[j])
    if shifted:
        for p, a in enumerate(tree.leaf_atoms):
            note("shift", f"leaf {p}", x[a] - spec.delta)
    for u in tree.internal_nodes():
        slack, _ = canonical_slacks(x, tree, u)
        for s, sl in enumerate(slack, start=1):
            note("subset", f"{tree.ids[u]} s={s}", sl)
    if spec.request is not None:
        note("request", f"leaf {spec.request}", spec.delta - x[spec.request_atom])
    return rep


def separate(x, spec: PolytopeSpec, tol: float = DEFAULT_TOL):
    """Return a most-violated constraint of ``P`` (and the request cap), or ``None``.

    Box violations are reported first, then root bounds, then the request
    cap, then subset constraints.  Within a family the largest violation
    wins, ties broken by node position and then by size.
    """
    tree = spec.tree
    x = _check_shape(x, tree)
    low = -x
    high = x - 1.0
    worst_box = max(low.max(), high.max())
    if worst_box > tol:
        if low.max() >= high.max():
            a = int(np.argmax(low))
            return BoxViolation(a, "lower", float(low[a]))
        a = int(np.argmax(high))
        return BoxViolation(a, "upper", float(high[a]))
    bounds = spec.root_bounds()
    root_viol = bounds - x[: tree.n]
    if root_viol.max() > tol:
        j = int(np.argmax(root_viol))
        return RootBound(j + 1, float(bounds[j]))
    if spec.request is not None and x[spec.request_atom] - spec.delta > tol:
        return RequestCap(spec.request_atom, spec.delta)
    return most_violated_subset(x, tree, tol)


def most_violated_subset(x, tree: WeightedTree, tol: float = DEFAULT_TOL):
    best = None
    best_v = tol
    for u in tree.internal_nodes():
        slack, order = canonical_slacks(x, tree, u)
        s = int(np.argmin(slack))
        if -slack[s] > best_v:
            best_v = -slack[s]
            best = SubsetConstraint(u, tuple(int(a) for a in order[: s + 1]))
    return best


def violated_subsets(x, tree: WeightedTree, tol: float) -> list[SubsetConstraint]:
    """All canonical subset constraints violated by more than ``tol``."""
    out = []
    for u in tree.internal_nodes():
        slack, order = canonical_slacks(x, tree, u)
        for s in np.flatnonzero(slack < -tol):
            out.append(SubsetConstraint(u, tuple(int(a) for a in order[: s + 1])))
    return out


def max_subset_violation(x, tree: WeightedTree) -> float:
    worst = 0.0
    for u in tree.internal_nodes():
        slack, _ = canonical_slacks(x, tree, u)
        worst = max(worst, float(-slack.min()))
    return worst


# -- tight sets ------------------------------------------------------------------

EXHAUSTIVE_LIMIT = 12


def exhaustive_slacks(x, tree: WeightedTree, u: int) -> tuple[np.ndarray, np.ndarray]:
    """Slack of every nonempty ``S`` in ``chi_u``, indexed by bitmask over
    ``tree.child_atoms(u)``.  Entry 0 (empty set) is ``+inf``."""
    ch = tree.child_atoms(u)
    m = len(ch)
    if m > EXHAUSTIVE_LIMIT + 8:
        raise ValueError(f"{m} child atoms is too many for exhaustive enumeration")
    masks = np.arange(1 << m)
    bits = (masks[:, None] >> np.arange(m)) & 1
    size = bits.sum(axis=1)
    rhs = bits @ x[ch]
    prefix = np.concatenate([[0.0], np.cumsum(x[tree.atoms_of(u)])])
    slack = rhs - prefix[size]
    slack[0] = np.inf
    return masks, slack


def tight_sets(x, tree: WeightedTree, u: int, tol: float = DEFAULT_TOL,
               exhaustive: bool = False) -> list[SubsetConstraint]:
    """Tight subset constraints at node ``u``.

    By default only the canonical per-size candidates are examined; with
    ``exhaustive=True`` (fanout up to ``EXHAUSTIVE_LIMIT`` child atoms) every
    subset is.
    """
    x = _check_shape(x, tree)
    if tree.is_leaf(u):
        return []
    if max_subset_violation(x, tree) > tol or x.min() < -tol:
        raise ValueError("tight_sets needs a feasible point")
    if exhaustive:
        ch = tree.child_atoms(u)
        if len(ch) > EXHAUSTIVE_LIMIT:
            raise ValueError("fanout too large for exhaustive tight-set search")
        masks, slack = exhaustive_slacks(x, tree, u)
        out = []
        for mask in masks[np.abs(slack) <= tol]:
            atoms = tuple(int(ch[i]) for i in range(len(ch)) if mask >> i & 1)
            out.append(SubsetConstraint(u, atoms))
        return out
    slack, order = canonical_slacks(x, tree, u)
    return [SubsetConstraint(u, tuple(int(a) for a in order[: s + 1]))
            for s in np.flatnonzero(np.abs(slack) <= tol)]


def uncrossing_violations(x, tree: WeightedTree, u: int, tol: float = DEFAULT_TOL,
                          union_tol: float | None = None) -> list[tuple[int, int]]:
    """Pairs of tight sets (as bitmasks over ``chi_u``) whose union is not tight."""
    union_tol = tol if union_tol is None else union_tol
    masks, slack = exhaustive_slacks(np.asarray(x, dtype=float), tree, u)
    tight = masks[np.abs(slack) <= tol]
    if len(tight) < 2:
        return []
    unions = tight[:, None] | tight[None, :]
    bad = np.abs(slack[unions]) > union_tol
    i, j = np.nonzero(np.triu(bad, 1))
    return [(int(tight[a]), int(tight[b])) for a, b in zip(i, j)]


# -- sampling -------------------------------------------------------------------

def sample_integer_points(tree: WeightedTree, h: int, rng: np.random.Generator, m: int,
                          cover: Optional[int] = None) -> list[np.ndarray]:
    """``m`` random Boolean encodings of placements of at most ``h`` servers.

    Servers may share a leaf.  With ``cover`` set, one server always sits on
    that leaf, so the point also satisfies the request cap.
    """
    from .tree import encode_integer

    out = []
    for _ in range(m):
        count = int(rng.integers(1, h + 1))
        leaves = list(rng.integers(0, tree.n, size=count))
        if cover is not None:
            leaves[0] = cover
        out.append(encode_integer(leaves, tree, h))
    return out


def sample_members(tree: WeightedTree, h: int, rng: np.random.Generator, m: int,
                   cover: Optional[int] = None, anchors: tuple = ()) -> list[np.ndarray]:
    """Random points of ``P`` (and of the request body when ``cover`` is set):
    convex combinations of integer encodings and the given ``anchors``."""
    out = []
    for _ in range(m):
        pts = sample_integer_points(tree, h, rng, int(rng.integers(2, 5)), cover)
        pts += [np.asarray(a, dtype=float) for a in anchors]
        lam = rng.dirichlet(np.ones(len(pts)))
        out.append(np.clip(sum(l * p for l, p in zip(lam, pts)), 0.0, 1.0))
    return out
