import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bregman_online.generators import generate_setcover
from bregman_online.offline import monotone_comparator, opt_setcover
from bregman_online.setcover import (
    SetCoverError,
    reverse_pythagorean_gap,
    sc_project,
    sc_run,
    step_audit,
)


def test_feasible_point_unchanged():
    a, lam = sc_project([0.5, 0.5], [1, 1])
    np.testing.assert_array_equal(a, [0.5, 0.5])
    assert lam == 0.0


def test_single_set_row():
    a, lam = sc_project([0.5, 0.5], [1, 0])
    np.testing.assert_allclose(a, [1.0, 0.5])
    assert lam == pytest.approx(math.log(2))


def test_scaling_row():
    a, lam = sc_project([0.25, 0.25], [1, 1])
    np.testing.assert_allclose(a, [0.5, 0.5])
    assert lam == pytest.approx(math.log(2))


def test_weighted_row_uses_root_find():
    a, lam = sc_project([0.1, 0.2, 0.3], [1, 2, 0])
    assert np.dot([1, 2, 0], a) == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(a, [0.1 * math.exp(lam), 0.2 * math.exp(2 * lam), 0.3])


@pytest.mark.parametrize("row", [[0, 0], [1, -1], [1, 1, 1]])
def test_bad_rows(row):
    with pytest.raises(SetCoverError):
        sc_project([0.5, 0.5], row)


def test_repeated_row():
    n = 5
    tr = sc_run([[1, 0, 0, 0, 0]] * 4)
    assert tr.cost == pytest.approx(1 + (n - 1) / n)
    assert tr.step_costs()[1:] == [0.0, 0.0, 0.0]


def test_empty_rows():
    assert sc_run([], n=6).cost == pytest.approx(1.0)
    with pytest.raises(SetCoverError):
        sc_run([])


def test_random_instance_guarantee():
    rows = generate_setcover(10, 30, 0.3, seed=5)
    tr = sc_run(rows)
    opt = opt_setcover(rows).cost
    assert tr.cost <= math.log(10) * opt + 1 + 1e-9


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 100_000), n=st.integers(2, 12), m=st.integers(1, 25))
def test_run_properties(seed, n, m):
    rows = generate_setcover(n, m, 0.35, seed=seed)
    tr = sc_run(rows)
    arr = np.array(rows, dtype=float)
    for t in range(1, len(tr.states)):
        # monotone, and covers every row seen so far
        assert np.all(tr.states[t] >= tr.states[t - 1])
        assert np.all(arr[:t] @ tr.states[t] >= 1 - 1e-12)
    sol = opt_setcover(rows, n)
    assert tr.cost <= math.log(n) * sol.cost + 1 + 1e-9
    bs = monotone_comparator(rows, sol.configs[0], n)
    for t in range(1, len(tr.states)):
        audit = step_audit(tr, bs, t)
        assert audit["passed"], audit


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_reverse_pythagoras(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 8))
    row = (rng.random(n) < 0.5).astype(float)
    row[int(rng.integers(n))] = 1.0
    a = rng.uniform(0.01, 0.3, n)
    new, _ = sc_project(a, row)
    for _ in range(10):
        # nonnegative y with <row, y> >= 1
        y = rng.uniform(0, 2, n)
        if row @ y < 1:
            y += (1 - row @ y) / row.sum() * row
        assert reverse_pythagorean_gap(y, a, new) >= -1e-9
