"""Seeded instance generators: HSTs, random trees, request sequences, set cover rows.

Every generator takes an integer ``seed`` and draws from
``numpy.random.default_rng(seed)`` (PCG64), so the same arguments always
give the same instance.
"""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .tree import WeightedTree, build_tree

RNG_NAME = "numpy.random.PCG64"
REQUEST_MODELS = ("uniform_random", "cyclic_k_plus_1", "adversarial_greedy")


class GeneratorError(ValueError):
    pass


def derive_seed(seed: int, index: int) -> int:
    """Independent per-instance seed, stable across platforms."""
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1)[0])


def generate_hst(branching: int, depth: int, ratio: float, root_weight: float = 1.0,
                 seed: int = 0, jitter: float = 0.0) -> WeightedTree:
    """Complete ``branching``-ary tree, weight ``root_weight * ratio**d`` at depth ``d``.

    ``jitter`` multiplies each non-root weight by a seeded factor in
    ``[1 - jitter, 1 + jitter]``.  ``ratio = 1`` is accepted (uniform
    weights); see :func:`hst_metadata`.
    """
    if int(branching) != branching or branching < 2:
        raise GeneratorError("branching must be an integer >= 2")
    if int(depth) != depth or depth < 1:
        raise GeneratorError("depth must be an integer >= 1")
    if not 0 < ratio <= 1:
        raise GeneratorError("ratio must lie in (0, 1]")
    if root_weight <= 0:
        raise GeneratorError("root_weight must be positive")
    if not 0 <= jitter < 1:
        raise GeneratorError("jitter must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    width = len(str(branching - 1))
    recs = [("r", None, float(root_weight))]
    frontier = ["r"]
    for d in range(1, depth + 1):
        nxt = []
        for u in frontier:
            for i in range(branching):
                v = f"{u}.{i:0{width}d}"
                w = root_weight * ratio ** d
                if jitter:
                    w *= float(rng.uniform(1 - jitter, 1 + jitter))
                recs.append((v, u, float(w)))
                nxt.append(v)
        frontier = nxt
    return build_tree(recs)


def hst_metadata(branching: int, depth: int, ratio: float, root_weight: float, seed: int,
                 jitter: float = 0.0) -> dict:
    return {"generator": "hst", "branching": branching, "depth": depth, "ratio": ratio,
            "root_weight": root_weight, "seed": seed, "jitter": jitter, "rng": RNG_NAME,
            "is_hst": ratio < 1}


def generate_random_tree(depth: int, max_branching: int = 3, min_leaves: int = 2,
                         max_leaves: int = 10, seed: int = 0, decay: float = 0.5,
                         max_tries: int = 1000) -> WeightedTree:
    """Random tree with all leaves at ``depth``.

    Each node gets ``1..max_branching`` children and weight
    ``U(0.1, 1) * decay**d``; draws are repeated until the leaf count lies
    in ``[min_leaves, max_leaves]``.
    """
    if depth < 1 or max_branching < 1 or min_leaves > max_leaves:
        raise GeneratorError("invalid random tree parameters")
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        recs = [("r", None, float(rng.uniform(0.5, 2.0)))]
        frontier = ["r"]
        for d in range(1, depth + 1):
            nxt = []
            for u in frontier:
                for i in range(int(rng.integers(1, max_branching + 1))):
                    v = f"{u}.{i}"
                    recs.append((v, u, float(rng.uniform(0.1, 1.0) * decay ** d)))
                    nxt.append(v)
            frontier = nxt
        if min_leaves <= len(frontier) <= max_leaves:
            return build_tree(recs)
    raise GeneratorError("could not hit the leaf-count window; loosen the limits")


def generate_setcover(n: int, rows: int, density: float = 0.3, seed: int = 0) -> list[list[int]]:
    """Random Boolean rows over ``n`` sets, each with at least one entry."""
    if n < 1 or rows < 0 or not 0 < density <= 1:
        raise GeneratorError("invalid set cover parameters")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(rows):
        row = (rng.random(n) < density).astype(int)
        if not row.any():
            row[int(rng.integers(n))] = 1
        out.append(row.tolist())
    return out


# -- requests ------------------------------------------------------------------------

def _greedy_target(scores: np.ndarray) -> int:
    return int(np.argmax(scores))            # ties: smallest leaf number


def generate_requests(model: str, params: dict, seed: int = 0) -> list[int]:
    """Request sequence of leaf numbers.

    ``uniform_random``: ``n``, ``length``.
    ``cyclic_k_plus_1``: ``n``, ``k``, ``length``, optional ``leaves``
    (the ``k+1`` leaves to cycle through; drawn from the seed otherwise).
    ``adversarial_greedy``: ``length``, ``k``, ``h``, ``initial`` and either
    ``tree`` (a :class:`WeightedTree`, k-server) or ``weights`` (paging);
    each request goes to the leaf with the largest current anti-server
    value, i.e. the least served one.
    """
    rng = np.random.default_rng(seed)
    length = int(params.get("length", 0))
    if length < 0:
        raise GeneratorError("length must be nonnegative")
    if model == "uniform_random":
        n = int(params["n"])
        return [int(r) for r in rng.integers(0, n, size=length)]
    if model == "cyclic_k_plus_1":
        n, k = int(params["n"]), int(params["k"])
        if k + 1 > n:
            raise GeneratorError("cyclic_k_plus_1 needs k + 1 <= n")
        leaves = params.get("leaves")
        if leaves is None:
            leaves = [int(v) for v in rng.choice(n, size=k + 1, replace=False)]
        leaves = [int(v) for v in leaves]
        if len(leaves) != k + 1:
            raise GeneratorError("need exactly k + 1 leaves")
        return [leaves[t % (k + 1)] for t in range(length)]
    if model == "adversarial_greedy":
        return _adversarial(params, length)
    raise GeneratorError(f"unknown request model {model!r}; choose from {REQUEST_MODELS}")


def _adversarial(params: dict, length: int) -> list[int]:
    k, h = int(params["k"]), int(params["h"])
    initial = [int(i) for i in params["initial"]]
    out = []
    if "tree" in params:
        from .kserver import KServerState

        tree = params["tree"]
        st = KServerState(tree, k, h, initial)
        for _ in range(length):
            r = _greedy_target(st.x[tree.leaf_atoms])
            st.serve(r)
            out.append(r)
        return out
    if "weights" in params:
        from .paging import PagingParams, initial_vector, paging_project

        p = PagingParams(np.asarray(params["weights"], dtype=float), k, h)
        a = initial_vector(p, initial)
        for _ in range(length):
            r = _greedy_target(a)
            a = paging_project(a, r, p)
            out.append(r)
        return out
    raise GeneratorError("adversarial_greedy needs a tree or paging weights")


def random_initial(n: int, k: int, seed: int) -> list[int]:
    rng = np.random.default_rng(seed)
    return sorted(int(i) for i in rng.choice(n, size=k, replace=False))


def paging_weights(n: int, seed: int, low: float = 1.0, high: float = 100.0) -> list[float]:
    rng = np.random.default_rng(seed)
    return [float(v) for v in rng.uniform(low, high, size=n)]


def describe(tree: WeightedTree, meta: Optional[dict] = None) -> dict:
    doc = {"nodes": tree.to_records()}
    if meta:
        doc["meta"] = meta
    return doc


def leaf_numbers(tree: WeightedTree, leaves: Sequence) -> list[int]:
    """Map leaf ids (or numbers) to leaf numbers."""
    return [tree.leaf_position(v) if isinstance(v, str) else int(v) for v in leaves]
