import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bregman_online import generators as gen
from bregman_online.offline import (
    OracleLimitError,
    kserver_comparator,
    kserver_cost,
    kserver_flow,
    monotone_comparator,
    opt_kserver,
    opt_paging,
    opt_setcover,
    paging_cost,
)
from bregman_online.tree import star

from _helpers import binary_depth2, brute_kserver, brute_paging, brute_setcover, random_kserver


# -- k-server ------------------------------------------------------------------------

def test_repeated_request_at_server():
    sol = opt_kserver(star([1, 1, 1]), 1, [0, 0, 0], [0])
    assert sol.cost == 0.0


def test_star_alternation():
    sol = opt_kserver(star([1, 1]), 1, [0, 1, 0], [0])
    assert sol.cost == pytest.approx(4.0)
    assert sol.configs == [(0,), (0,), (1,), (0,)]


def test_requests_inside_one_subtree():
    t = binary_depth2()
    # servers start under a; requests hit both leaves under b
    seq = [2, 3, 2, 3]
    dp = opt_kserver(t, 2, seq, [0, 1], method="dp")
    fl = opt_kserver(t, 2, seq, [0, 1], method="flow")
    # best plan: move both servers across the root once
    assert dp.cost == pytest.approx(2 * (1 + 2 + 2 + 1))
    assert fl.cost == pytest.approx(dp.cost)


def test_cost_resimulation():
    rng = np.random.default_rng(0)
    for _ in range(10):
        tree, k, h, init, reqs = random_kserver(rng, max_len=10)
        sol = opt_kserver(tree, h, reqs, init)
        assert sum(kserver_cost(sol.configs, tree)) == pytest.approx(sol.cost, abs=1e-12)
        assert all(r in c for r, c in zip(reqs, sol.configs[1:]))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_dp_matches_flow(seed):
    rng = np.random.default_rng(seed)
    tree, k, h, init, reqs = random_kserver(rng, max_h=3, max_len=12)
    dp = opt_kserver(tree, h, reqs, init, method="dp")
    fl = kserver_flow(tree, h, reqs, init)
    assert dp.cost == pytest.approx(fl.cost, abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_dp_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    tree = gen.generate_random_tree(2, 3, 2, 4, seed=seed)
    n = tree.n
    h = int(rng.integers(1, min(2, n) + 1))
    k = int(rng.integers(h, n + 1)) if h < n else h
    init = sorted(int(i) for i in rng.choice(n, min(k, n), replace=False))
    reqs = [int(r) for r in rng.integers(0, n, int(rng.integers(1, 5)))]
    assert opt_kserver(tree, h, reqs, init).cost == pytest.approx(brute_kserver(tree, h, reqs, init))


def test_comparator_encodings():
    t = binary_depth2()
    sol = opt_kserver(t, 2, [3, 0], [0, 1])
    ys = kserver_comparator(sol, t, 2)
    assert len(ys) == 3
    for y, c in zip(ys, sol.configs):
        assert set(np.flatnonzero(y[t.leaf_atoms] == 0)) == set(c)


def test_kserver_limits():
    t = gen.generate_hst(2, 4, 0.5)
    with pytest.raises(OracleLimitError):
        opt_kserver(t, 2, [0], [0, 1], method="dp")
    with pytest.raises(OracleLimitError):
        kserver_flow(star([1] * 6), 4, [0], [0, 1, 2, 3])


# -- paging ----------------------------------------------------------------------------

def test_full_cache_is_free():
    sol = opt_paging([1, 1, 1], 3, [0, 1, 2, 0], [0, 1, 2])
    assert sol.cost == 0.0


def test_alternating_two_pages():
    sol = opt_paging([1, 1], 1, [0, 1, 0, 1], [0])
    assert sol.cost == pytest.approx(3.0)


def test_single_slot_every_miss_is_forced():
    # with one slot every change of request forces an eviction
    sol = opt_paging([1, 10], 1, [1, 0, 1, 0], [1])
    assert sol.cost == pytest.approx(21.0)


def test_weighted_evicts_cheap_pages():
    sol = opt_paging([1, 10, 1], 2, [2, 0, 2, 0], [0, 1])
    assert sol.cost == pytest.approx(4.0)
    assert all(1 in c for c in sol.configs)


def test_paging_resimulation():
    sol = opt_paging([3, 1, 2, 5], 2, [0, 1, 2, 3, 0, 2], [0, 1])
    assert sum(paging_cost(sol.configs, [3, 1, 2, 5])) == pytest.approx(sol.cost)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_paging_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 5))
    h = int(rng.integers(1, n + 1))
    w = [float(v) for v in rng.integers(1, 10, n)]
    init = sorted(int(i) for i in rng.choice(n, h, replace=False))
    reqs = [int(r) for r in rng.integers(0, n, int(rng.integers(1, 6)))]
    assert opt_paging(w, h, reqs, init).cost == pytest.approx(brute_paging(w, h, reqs, init))


# -- set cover --------------------------------------------------------------------------

def test_setcover_examples():
    assert opt_setcover([[1, 0], [0, 1]]).cost == 2
    assert opt_setcover([[1, 0, 1], [1, 1, 0], [1, 0, 0]]).cost == 1


def test_setcover_errors():
    with pytest.raises(ValueError):
        opt_setcover([[0, 0]])
    with pytest.raises(OracleLimitError):
        opt_setcover([[1] * 17])


def test_setcover_matches_brute_force():
    rng = np.random.default_rng(3)
    for seed in range(5):
        rows = gen.generate_setcover(10, 20, 0.3, seed=int(rng.integers(1000)))
        assert opt_setcover(rows).cost == brute_setcover(rows, 10)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 100_000), n=st.integers(1, 9), m=st.integers(0, 15))
def test_monotone_comparator(seed, n, m):
    rows = gen.generate_setcover(n, m, 0.3, seed=seed)
    sol = opt_setcover(rows, n)
    bs = monotone_comparator(rows, sol.configs[0], n)
    for t in range(1, len(bs)):
        assert np.all(bs[t] >= bs[t - 1])
        assert np.asarray(rows[t - 1]) @ bs[t] >= 1
    # no cost change: the final b is the optimal set itself
    assert bs[-1].sum() == sol.cost
