import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bregman_online.tree import (
    TreeError,
    build_tree,
    encode_integer,
    leaf_distance_matrix,
    reduce_depth,
    server_distance,
    star,
    subtree_sums,
    to_server_vector,
    tree_from_json,
    tree_norm,
)
from bregman_online import generators as gen

from _helpers import binary_depth2


# -- construction --------------------------------------------------------------

def test_star_counts():
    t = star([1.0, 1.0])
    assert (t.D, t.n, t.N) == (1, 2, 4)
    assert len(t.atoms_of(t.root)) == 2
    assert all(len(t.atoms_of(int(l))) == 1 for l in t.leaves)


def test_shallow_leaf_is_padded():
    t = build_tree([("r", None, 1), ("a", "r", 1), ("l1", "a", 1), ("l2", "r", 1)])
    assert t.D == 2 and t.n == 2
    assert len(t.padded) == 1
    pad = t.index[t.padded[0]]
    assert t.parent[t.index["l2"]] == pad
    assert 0 < t.weights[pad] < 1e-9
    assert np.all(t.weights > 0)


def test_single_node_tree():
    t = build_tree([("r", None, 2.0)])
    assert (t.D, t.n, t.N) == (0, 1, 1)


@pytest.mark.parametrize("recs, msg", [
    ([], "empty"),
    ([("r", None, 1), ("s", None, 1)], "one root"),
    ([("r", None, 1), ("a", "r", 1), ("a", "r", 1)], "duplicate"),
    ([("r", None, 1), ("a", "zz", 1)], "unknown parent"),
    ([("r", None, 1), ("a", "r", -1)], "negative"),
    ([("r", None, 1), ("a", "b", 1), ("b", "a", 1)], "cycle"),
])
def test_invalid_trees(recs, msg):
    with pytest.raises(TreeError, match=msg):
        build_tree(recs)


def test_json_round_trip():
    t = binary_depth2()
    t2 = tree_from_json(t.to_json())
    assert t2.ids == t.ids
    np.testing.assert_array_equal(t2.weights, t.weights)
    recs = json.loads(t.to_json())["nodes"]
    assert [r["id"] for r in recs if r["parent"] is None] == ["r"]


def test_atom_layout():
    t = binary_depth2()
    assert t.N == t.n * (t.D + 1) == 12
    for d in range(t.D + 1):
        assert len(t.level_atoms(d)) == t.n
    # child atoms of u are exactly the atoms of its children
    for u in t.internal_nodes():
        expect = np.concatenate([t.atoms_of(c) for c in t.children[u]])
        np.testing.assert_array_equal(np.sort(t.child_atoms(u)), np.sort(expect))


# -- norms and distances ---------------------------------------------------------

def test_tree_norm_examples():
    t = star([1.0, 1.0])
    assert tree_norm(np.zeros(4), t) == 0.0
    v = np.zeros(4)
    v[t.leaf_atoms] = [1 / 3, -1 / 3]
    assert tree_norm(v, t) == pytest.approx(2 / 3)
    assert tree_norm(np.ones(4), t) == pytest.approx(4.0)


def test_tree_norm_shape_check():
    with pytest.raises(ValueError):
        tree_norm(np.zeros(3), star([1, 1]))


def test_server_distance_examples():
    t = star([1.0, 1.0])
    assert server_distance([1, 0], [1, 0], t) == 0.0
    assert server_distance([1, 0], [0, 1], t) == pytest.approx(2.0)
    chain = build_tree([("r", None, 4), ("a", "r", 2), ("b", "r", 2), ("x", "a", 1), ("y", "b", 1)])
    assert server_distance([1, 0], [0, 1], chain) == pytest.approx(6.0)


def test_leaf_distances_match_server_distance():
    t = gen.generate_random_tree(3, 3, 3, 9, seed=4)
    dist = leaf_distance_matrix(t)
    for a in range(t.n):
        for b in range(t.n):
            za = np.eye(t.n)[a]
            zb = np.eye(t.n)[b]
            assert dist[a, b] == pytest.approx(server_distance(za, zb, t), abs=1e-12)


def test_subtree_sums_brute_force():
    t = gen.generate_random_tree(3, 3, 2, 10, seed=9)
    z = np.arange(1, t.n + 1, dtype=float)
    sums = subtree_sums(z, t)
    for u in range(t.num_nodes):
        # walk up from each leaf
        total = 0.0
        for p, leaf in enumerate(t.leaves):
            v = int(leaf)
            while v >= 0 and v != u:
                v = int(t.parent[v])
            total += z[p] if v == u else 0.0
        assert sums[u] == pytest.approx(total)


def test_to_server_vector_examples():
    t = star([1.0, 1.0])
    d = 1 / 3
    x = np.array([0, 1, d, 2 * d])
    z = to_server_vector(x, d, t)
    np.testing.assert_allclose(z, [1.0, 0.5])
    assert z.sum() == pytest.approx(1.5)
    x1 = np.array([0, 1, d, 1.0])
    assert to_server_vector(x1, d, t)[1] == pytest.approx(0.0)


# -- integer encodings -------------------------------------------------------------

def test_encode_integer_star():
    t = star([1.0, 1.0])
    y = encode_integer([0], t, h=1)
    np.testing.assert_array_equal(y[t.atoms_of(t.root)], [0, 1])
    np.testing.assert_array_equal(y[t.leaf_atoms], [0, 1])
    np.testing.assert_array_equal(encode_integer([], t, h=0), np.ones(4))


def test_encode_integer_depth2():
    t = binary_depth2()
    y = encode_integer(["a0", "a1"], t, h=2)
    np.testing.assert_array_equal(y[t.atoms_of(t.index["a"])], [0, 0])
    np.testing.assert_array_equal(y[t.atoms_of(t.index["b"])], [1, 1])
    np.testing.assert_array_equal(y[t.atoms_of(t.root)], [0, 0, 1, 1])


def test_encode_integer_rejects_excess():
    with pytest.raises(ValueError):
        encode_integer([0, 1], star([1, 1, 1]), h=1)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10_000), data=st.data())
def test_encoding_counts_servers(seed, data):
    t = gen.generate_random_tree(3, 3, 2, 8, seed=seed)
    leaves = data.draw(st.lists(st.integers(0, t.n - 1), max_size=t.n))
    y = encode_integer(leaves, t)
    counts = subtree_sums(np.bincount(leaves, minlength=t.n).astype(float), t)
    for u in range(t.num_nodes):
        # number of zero slots at u is min(servers in T_u, |L_u|)
        assert int((y[t.atoms_of(u)] == 0).sum()) == min(int(counts[u]), int(t.leaf_count[u]))


# -- depth reduction ---------------------------------------------------------------

def test_reduce_depth_balanced_binary_unchanged():
    t = binary_depth2()
    r = reduce_depth(t)
    assert r.ids == t.ids and r.D == 2


def test_reduce_depth_single_leaf_chain():
    recs = [("r", None, 1)] + [(f"p{i}", "r" if i == 0 else f"p{i - 1}", 1) for i in range(10)]
    r = reduce_depth(build_tree(recs))
    assert r.D == 1 and r.n == 1


def test_reduce_depth_star_unchanged():
    t = star([1, 2, 3])
    assert reduce_depth(t).ids == t.ids


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_reduce_depth_halves_leaf_counts(seed):
    t = gen.generate_random_tree(4, 3, 2, 10, seed=seed)
    r = reduce_depth(t)
    assert sorted(r.ids[int(l)] for l in r.leaves if r.ids[int(l)] in t.index) == \
        sorted(t.ids[int(l)] for l in t.leaves)
    for u in range(r.num_nodes):
        if r.ids[u] in r.padded:
            continue
        for c in r.children[u]:
            if r.children[c] and r.ids[c] not in r.padded:
                assert 2 * r.leaf_count[c] <= r.leaf_count[u]


# -- norm properties ---------------------------------------------------------------

vectors = st.lists(st.floats(-5, 5, allow_nan=False), min_size=12, max_size=12).map(np.array)


@settings(max_examples=100, deadline=None)
@given(u=vectors, v=vectors, c=st.floats(-3, 3, allow_nan=False))
def test_tree_norm_axioms(u, v, c):
    t = binary_depth2()
    assert tree_norm(u, t) >= 0
    assert tree_norm(c * u, t) == pytest.approx(abs(c) * tree_norm(u, t), rel=1e-9, abs=1e-12)
    assert tree_norm(u + v, t) <= tree_norm(u, t) + tree_norm(v, t) + 1e-9


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_leaf_distance_is_a_metric(seed):
    t = gen.generate_random_tree(3, 3, 2, 8, seed=seed)
    d = leaf_distance_matrix(t)
    np.testing.assert_allclose(d, d.T)
    assert np.all(np.diag(d) == 0)
    assert np.all(d[~np.eye(t.n, dtype=bool)] > 0)
    # d[a, c] <= d[a, b] + d[b, c] for all a, b, c
    assert np.all(d[:, None, :] <= d[:, :, None] + d[None, :, :] + 1e-12)
