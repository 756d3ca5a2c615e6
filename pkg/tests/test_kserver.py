import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bregman_online import kserver
from bregman_online.bregman import DivergenceParams, reference_project, divergence
from bregman_online.kserver import (
    KServerState,
    audit_run,
    audit_step,
    flow_direction_violation,
    init_state,
    initial_point,
    run,
    serve,
    structural_residuals,
)
from bregman_online.offline import kserver_comparator, opt_kserver
from bregman_online.polytope import PolytopeSpec, check_membership
from bregman_online.tree import encode_integer, star, tree_norm

from _helpers import binary_depth2, random_kserver

D3 = 1 / 3


def test_initial_point_star():
    t = star([1.0, 1.0])
    x = initial_point(t, 1, 1, [0])
    np.testing.assert_allclose(x, [0, 1, D3, 2 * D3])


def test_initial_point_rejects_k_equal_n():
    t = star([1.0, 1.0])
    with pytest.raises(ValueError):
        initial_point(t, 2, 2, [0, 1])


def test_initial_point_binary_is_member():
    t = binary_depth2()
    x = initial_point(t, 2, 2, [0, 1])
    assert check_membership(x, PolytopeSpec.from_kh(t, 2, 2)).member


def test_initial_point_validation():
    t = binary_depth2()
    with pytest.raises(ValueError):
        initial_point(t, 2, 2, [0, 0])
    with pytest.raises(ValueError):
        initial_point(t, 2, 2, [0])


def test_served_request_costs_nothing():
    st_ = init_state(star([1.0, 1.0]), 1, 1, [0])
    rec = serve(st_, 0)
    assert rec.movement == 0.0 and rec.positive_movement == 0.0


def test_star_alternation():
    st_ = init_state(star([1.0, 1.0]), 1, 1, [0])
    t = st_.tree
    for r in [1, 0, 1, 0]:
        rec = serve(st_, r)
        assert rec.movement == pytest.approx(2 / 3, abs=1e-10)
        expect = [2 * D3, 2 * D3]
        expect[r] = D3
        np.testing.assert_allclose(st_.x[t.leaf_atoms], expect, atol=1e-10)


def test_run_empty_and_alternating():
    t = star([1.0, 1.0])
    assert run(t, 1, 1, [0], []).total_movement == 0.0
    tr = run(t, 1, 1, [0], [1, 0] * 5)
    assert tr.total_movement == pytest.approx(10 * 2 / 3, abs=1e-9)
    assert len(tr.states) == 11


def test_movement_matches_reference_solver():
    t = binary_depth2()
    st_ = KServerState(t, 2, 2, [0, 1])
    p = st_.params
    for r in [3, 0, 2, 1, 3]:
        prev = st_.x.copy()
        ref = reference_project(prev, st_.spec.with_request(r), p)
        rec = st_.serve(r)
        assert rec.movement == pytest.approx(tree_norm(ref.x - prev, t), abs=1e-6)


def test_bad_request_rejected():
    st_ = KServerState(star([1.0, 1.0]), 1, 1, [0])
    with pytest.raises(ValueError):
        st_.serve(5)


# -- audits ------------------------------------------------------------------------

def test_noop_step_audit_passes():
    t = star([1.0, 1.0])
    st_ = KServerState(t, 1, 1, [0])
    x = st_.x.copy()
    rec = st_.serve(0)
    y = encode_integer([0], t, 1)
    rep = audit_step(x, st_.x, st_.last_result, y, y, t, st_.delta, 0)
    assert rep.passed
    assert rep.checks["opt_charge"]["residual"] == 0.0
    assert rep.checks["shadow"]["residual"] == 0.0
    assert rec.movement == 0.0


def test_star_step_audit_values():
    t = star([1.0, 1.0])
    st_ = KServerState(t, 1, 1, [0])
    x_prev = st_.x.copy()
    st_.serve(1)
    y_prev = encode_integer([0], t, 1)
    y_new = encode_integer([1], t, 1)
    rep = audit_step(x_prev, st_.x, st_.last_result, y_prev, y_new, t, D3, 1)
    assert rep.passed
    # potentials at delta = 1/3 worked out by hand
    c = (4 / 3) * math.log(4)
    assert rep.checks["opt_charge"]["residual"] == pytest.approx(math.log(1.5) - c, abs=1e-9)
    assert rep.checks["shadow"]["residual"] == pytest.approx(-(2 / 3) * math.log(1.5), abs=1e-9)


def test_audit_without_certificate_skips():
    t = star([1.0, 1.0])
    st_ = KServerState(t, 1, 1, [0])
    x_prev = st_.x.copy()
    st_.serve(1)
    y = encode_integer([1], t, 1)
    rep = audit_step(x_prev, st_.x, None, y, y, t, D3, 1)
    p, f, s = rep.counts()
    assert f == 0 and s == 5 and p == 2


def test_random_depth3_run_passes_audits():
    rng = np.random.default_rng(11)
    from bregman_online import generators as gen
    t = gen.generate_random_tree(3, 3, 4, 8, seed=3)
    k, h = 3, 2
    init = [0, 1, 2]
    reqs = [int(r) for r in rng.integers(0, t.n, 15)]
    tr = run(t, k, h, init, reqs)
    ys = kserver_comparator(opt_kserver(t, h, reqs, init), t, h)
    for rep in audit_run(tr, ys):
        assert rep.passed, rep.checks


# -- properties -----------------------------------------------------------------------

@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_structural_invariants(seed):
    rng = np.random.default_rng(seed)
    tree, k, h, init, reqs = random_kserver(rng, max_depth=4, max_leaves=10, max_len=15)
    tr = run(tree, k, h, init, reqs)
    for t, r in enumerate(reqs, start=1):
        res = structural_residuals(tr.states[t], tree, h, tr.delta, r)
        assert max(res.values()) <= 1e-8, res
        assert flow_direction_violation(tr.states[t - 1], tr.states[t], tree, r) <= 1e-8
    # fractional servers: total k + 1/2 on the leaves
    z = kserver.to_server_vector(tr.states[-1], tr.delta, tree)
    assert z.sum() == pytest.approx(k + 0.5, abs=1e-8)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_server_movement_bounded_by_tree_norm(seed):
    rng = np.random.default_rng(seed)
    tree, k, h, init, reqs = random_kserver(rng, max_len=10)
    tr = run(tree, k, h, init, reqs)
    for rec in tr.records:
        # d(z, z') <= ||x - x'||_T / (1 - delta)
        assert rec.server_movement * (1 - tr.delta) <= rec.movement + 1e-9


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_aggregate_bound_holds(seed):
    rng = np.random.default_rng(seed)
    tree, k, h, init, reqs = random_kserver(rng, max_len=12)
    tr = run(tree, k, h, init, reqs)
    ys = kserver_comparator(opt_kserver(tree, h, reqs, init), tree, h)
    agg = kserver.aggregate_bound(tr, ys)
    assert agg["alg_positive"] <= agg["bound"] + 1e-6
    assert agg["alg_positive"] <= agg["strict_bound"] + 1e-6
