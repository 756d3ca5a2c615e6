import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bregman_online import generators as gen
from bregman_online.polytope import (
    BoxViolation,
    PolytopeSpec,
    RequestCap,
    RootBound,
    SubsetConstraint,
    canonical_slacks,
    check_membership,
    exhaustive_slacks,
    sample_integer_points,
    sample_members,
    separate,
    shift_for,
    tight_sets,
    uncrossing_violations,
)
from bregman_online.tree import encode_integer, star

from _helpers import binary_depth2, brute_subset_slack


def star_point(leaves, root=(0.0, 1.0)):
    t = star([1.0] * len(leaves))
    return t, np.array([*root, *leaves], dtype=float)


def test_shift_formula():
    assert shift_for(1, 1) == pytest.approx(1 / 3)
    assert shift_for(2, 2) == pytest.approx(0.2)
    assert shift_for(3, 1) == pytest.approx(2.5 / 3.5)


def test_integer_encodings_are_members():
    t = binary_depth2()
    spec = PolytopeSpec(t, 2, 0.2)
    for servers in ([0, 1], [0, 3], [2, 2], [1], []):
        rep = check_membership(encode_integer(servers, t, 2), spec, shifted=False)
        assert rep.member, rep.violations


def test_star_member_and_violation():
    t, x = star_point([0.2, 0.9])
    spec = PolytopeSpec(t, 1, 0.1)
    assert check_membership(x, spec).member
    assert separate(x, spec) is None

    t, x = star_point([0.2, 0.7])
    rep = check_membership(x, spec)
    assert not rep.member
    assert [(f, w) for f, w, _ in rep.violations] == [("subset", "r s=2")]
    assert rep.violations[0][2] == pytest.approx(-0.1)
    cut = separate(x, spec)
    assert isinstance(cut, SubsetConstraint)
    assert cut.node == t.root and sorted(cut.atoms) == sorted(t.leaf_atoms.tolist())


def test_box_reported_before_subsets():
    t, x = star_point([-0.1, 0.7])
    cut = separate(x, PolytopeSpec(t, 1, 0.1))
    assert isinstance(cut, BoxViolation)
    assert cut.atom == t.leaf_atoms[0]


def test_root_bound_and_request_cap():
    t, x = star_point([0.2, 0.9], root=(0.0, 0.5))
    assert isinstance(separate(x, PolytopeSpec(t, 1, 0.1)), RootBound)
    t, x = star_point([0.3, 0.9])
    cut = separate(x, PolytopeSpec(t, 1, 0.1, request=0))
    assert isinstance(cut, RequestCap)


def test_shifted_membership_needs_leaf_floor():
    t, x = star_point([0.05, 0.95])
    spec = PolytopeSpec(t, 1, 0.1)
    assert check_membership(x, spec, shifted=False).member
    rep = check_membership(x, spec)
    assert not rep.member and rep.violations[0][0] == "shift"


def test_tight_sets_examples():
    t, x = star_point([0.3, 0.7])
    ts = tight_sets(x, t, t.root)
    assert len(ts) == 1 and ts[0].size == 2
    t, x = star_point([0.3, 0.8])
    assert tight_sets(x, t, t.root) == []


def test_exhaustive_tight_sets_closed_under_union():
    t = star([1.0, 1.0, 1.0])
    x = encode_integer([0, 1], t, 2)
    ts = tight_sets(x, t, t.root, exhaustive=True)
    found = {frozenset(S.atoms) for S in ts}
    for a in found:
        for b in found:
            assert a | b in found
    assert uncrossing_violations(x, t, t.root) == []
    assert len(found) == 4


def test_tight_sets_require_feasible_point():
    t, x = star_point([0.2, 0.7])
    with pytest.raises(ValueError):
        tight_sets(x, t, t.root)


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_canonical_check_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    t = gen.generate_random_tree(int(rng.integers(1, 4)), 3, 2, 6, seed=seed)
    x = rng.random(t.N)
    spec = PolytopeSpec(t, 1, 0.1)
    rep = check_membership(x, spec, shifted=False)
    brute = brute_subset_slack(x, t)
    if t.internal_nodes():
        assert rep.worst["subset"] == pytest.approx(brute, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_exhaustive_slacks_minimum_is_canonical(seed):
    rng = np.random.default_rng(seed)
    t = gen.generate_random_tree(2, 4, 3, 8, seed=seed)
    x = rng.random(t.N)
    for u in t.internal_nodes():
        _, slack = exhaustive_slacks(x, t, u)
        ch = t.child_atoms(u)
        sizes = np.array([bin(m).count("1") for m in range(1 << len(ch))])
        canon, _ = canonical_slacks(x, t, u)
        for s in range(1, len(ch) + 1):
            assert slack[sizes == s].min() == pytest.approx(canon[s - 1], abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_samplers_produce_members(seed):
    rng = np.random.default_rng(seed)
    t = gen.generate_random_tree(3, 3, 2, 8, seed=seed)
    h = int(rng.integers(1, t.n + 1))
    r = int(rng.integers(t.n))
    spec = PolytopeSpec(t, h, 0.3, request=r)
    pts = sample_integer_points(t, h, rng, 5, cover=r) + sample_members(t, h, rng, 5, cover=r)
    for y in pts:
        rep = check_membership(y, spec, shifted=False, tol=1e-12)
        assert rep.member, rep.violations
        assert y[t.leaf_atoms[r]] == pytest.approx(0.0)
