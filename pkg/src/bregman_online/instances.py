"""Instance files for the three problems.

k-server::

    {"problem": "kserver", "tree": {"nodes": [...]}, "k": 2, "h": 2,
     "initial": ["r.0.0", "r.1.0"], "requests": ["r.0.1", ...]}

Leaves may be given by id or by leaf number.

paging::

    {"problem": "paging", "weights": [...], "k": 2, "h": 2,
     "initial": [0, 1], "requests": [2, 0, ...]}

set cover::

    {"problem": "setcover", "n": 4, "rows": [[1, 0, 1, 0], ...]}
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from .tree import TreeError, WeightedTree, build_tree

PROBLEMS = ("kserver", "paging", "setcover")


class InstanceError(ValueError):
    """Malformed or inconsistent instance."""


@dataclass
class Instance:
    problem: str
    k: Optional[int] = None
    h: Optional[int] = None
    tree: Optional[WeightedTree] = None
    weights: Optional[list] = None
    n: Optional[int] = None
    initial: list = field(default_factory=list)      # leaf numbers / pages
    requests: list = field(default_factory=list)     # leaf numbers / pages
    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        if self.problem == "kserver":
            return self.tree.n
        if self.problem == "paging":
            return len(self.weights)
        return int(self.n)

    def to_dict(self) -> dict:
        doc = {"problem": self.problem}
        if self.problem == "kserver":
            ids = self.tree.leaf_ids()
            doc.update(tree={"nodes": self.tree.to_records()}, k=self.k, h=self.h,
                       initial=[ids[i] for i in self.initial],
                       requests=[ids[r] for r in self.requests])
        elif self.problem == "paging":
            doc.update(weights=[float(w) for w in self.weights], k=self.k, h=self.h,
                       initial=list(self.initial), requests=list(self.requests))
        else:
            doc.update(n=self.n, rows=[list(map(int, r)) for r in self.rows])
        if self.meta:
            doc["meta"] = self.meta
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _leaves(tree: WeightedTree, seq, what: str) -> list[int]:
    out = []
    for v in seq:
        try:
            out.append(tree.leaf_position(v) if isinstance(v, str) else int(v))
        except (TreeError, KeyError) as e:
            raise InstanceError(f"{what}: {v!r} is not a leaf") from e
        if not 0 <= out[-1] < tree.n:
            raise InstanceError(f"{what}: leaf number {v} out of range")
    return out


def _int(doc, key):
    if key not in doc:
        raise InstanceError(f"missing field {key!r}")
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise InstanceError(f"{key!r} must be an integer")
    return v


def instance_from_dict(doc: dict) -> Instance:
    if not isinstance(doc, dict):
        raise InstanceError("instance must be a JSON object")
    problem = doc.get("problem")
    if problem not in PROBLEMS:
        raise InstanceError(f"problem must be one of {PROBLEMS}, got {problem!r}")
    meta = dict(doc.get("meta", {}))
    if problem == "kserver":
        try:
            tree = build_tree(doc["tree"])
        except KeyError as e:
            raise InstanceError("kserver instance needs a tree") from e
        except TreeError as e:
            raise InstanceError(f"bad tree: {e}") from e
        k, h = _int(doc, "k"), _int(doc, "h")
        if not 1 <= h <= k < tree.n:
            raise InstanceError(f"need 1 <= h <= k < n, got h={h}, k={k}, n={tree.n}")
        initial = _leaves(tree, doc.get("initial", []), "initial")
        if len(initial) != k or len(set(initial)) != k:
            raise InstanceError(f"initial must list {k} distinct leaves")
        return Instance("kserver", k, h, tree=tree, initial=initial,
                        requests=_leaves(tree, doc.get("requests", []), "requests"), meta=meta)
    if problem == "paging":
        w = doc.get("weights")
        if not isinstance(w, list) or not w or any(not isinstance(x, (int, float)) or x <= 0 for x in w):
            raise InstanceError("weights must be a nonempty list of positive numbers")
        n = len(w)
        k, h = _int(doc, "k"), _int(doc, "h")
        if not 1 <= h <= k < n:
            raise InstanceError(f"need 1 <= h <= k < n, got h={h}, k={k}, n={n}")
        initial = [int(i) for i in doc.get("initial", [])]
        reqs = [int(r) for r in doc.get("requests", [])]
        if len(initial) != k or len(set(initial)) != k or any(not 0 <= i < n for i in initial):
            raise InstanceError(f"initial must list {k} distinct pages in [0, {n})")
        if any(not 0 <= r < n for r in reqs):
            raise InstanceError("request out of range")
        return Instance("paging", k, h, weights=[float(x) for x in w], initial=initial,
                        requests=reqs, meta=meta)
    n = _int(doc, "n")
    rows = doc.get("rows", [])
    if n < 1:
        raise InstanceError("n must be positive")
    for r in rows:
        if not isinstance(r, list) or len(r) != n or any(v not in (0, 1) for v in r):
            raise InstanceError(f"rows must be 0/1 lists of length {n}")
        if not any(r):
            raise InstanceError("all-zero row cannot be covered")
    return Instance("setcover", n=n, rows=[list(r) for r in rows], meta=meta)


def load_instance(path: Union[str, Path]) -> Instance:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise InstanceError(f"{path}: invalid JSON ({e})") from e
    return instance_from_dict(doc)


def save_instance(inst: Instance, path: Union[str, Path]) -> None:
    Path(path).write_text(inst.to_json() + "\n")
