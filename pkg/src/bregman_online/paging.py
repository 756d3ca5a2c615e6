"""Weighted (h,k)-paging as a closed-form KL projection.

The algorithm keeps an anti-paging vector ``a`` in ``[delta, 1]^n`` with
``sum(a) = n - h`` (``a_i`` is the fraction of page ``i`` *missing* from the
cache).  On a request ``r`` it projects ``a`` onto
``{x in [0,1]^n : sum(x) >= n - h, x_r <= delta}`` under the weighted
unnormalised KL divergence.  The optimality conditions give

    a'_r = delta,      a'_i = min(1, a_i exp(lam / w_i))   (i != r)

with ``lam >= 0`` fixed by the mass equation, so a single scalar root
find is all that is needed.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import kl_div, rel_entr

from .polytope import shift_for

CAP_TOL = 1e-12
MASS_TOL = 1e-12


class PagingError(ValueError):
    pass


@dataclass(frozen=True)
class PagingParams:
    weights: np.ndarray
    k: int
    h: int

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or len(w) == 0 or np.any(w <= 0):
            raise PagingError("weights must be a nonempty positive vector")
        object.__setattr__(self, "weights", w)
        if not 1 <= self.h <= self.k <= self.n:
            raise PagingError(f"need 1 <= h <= k <= n, got h={self.h}, k={self.k}, n={self.n}")

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def delta(self) -> float:
        return shift_for(self.k, self.h)

    @property
    def mass(self) -> float:
        return float(self.n - self.h)


def initial_vector(params: PagingParams, initial: Sequence[int]) -> np.ndarray:
    """``delta`` on the initial cache, ``(n - h - delta k)/(n - k)`` elsewhere."""
    n, k = params.n, params.k
    cache = [int(i) for i in initial]
    if len(cache) != k or len(set(cache)) != k:
        raise PagingError(f"initial cache must hold {k} distinct pages")
    if any(not 0 <= i < n for i in cache):
        raise PagingError("initial cache page out of range")
    if k == n:
        raise PagingError("k = n leaves no page outside the cache; the initial point is undefined")
    a = np.full(n, (n - params.h - params.delta * k) / (n - k))
    a[cache] = params.delta
    return a


def _mass(lam, a_prev, w, r, delta):
    grown = np.minimum(1.0, a_prev * np.exp(np.minimum(lam / w, 700.0)))
    grown[r] = delta
    return grown.sum()


def paging_project(a_prev, r: int, params: PagingParams, tol: float = MASS_TOL,
                   return_multiplier: bool = False):
    """Project ``a_prev`` onto the body for request ``r``.

    >>> p = PagingParams(np.ones(3), k=2, h=2)
    >>> a = paging_project(np.array([0.2, 0.2, 0.6]), 2, p)
    >>> np.round(a, 12).tolist()
    [0.4, 0.4, 0.2]
    """
    a_prev = np.asarray(a_prev, dtype=float)
    w, delta, target = params.weights, params.delta, params.mass
    if a_prev.shape != (params.n,):
        raise PagingError(f"expected {params.n} coordinates, got {a_prev.shape}")
    if a_prev[r] <= delta:
        return (a_prev.copy(), 0.0) if return_multiplier else a_prev.copy()
    capped = a_prev >= 1.0 - CAP_TOL
    base = a_prev.copy()
    base[capped] = 1.0
    # the request cap alone may already fix the mass (nothing else can grow)
    full = _mass(np.inf, base, w, r, delta) if np.all(np.isfinite(base)) else np.inf
    if full < target - 1e-9:
        raise PagingError("mass n - h unreachable with every other page at 1")
    f0 = _mass(0.0, base, w, r, delta) - target
    if f0 >= 0.0:
        lam = 0.0
    else:
        hi = float(w.max() * np.log(params.n / max(base.min(), 1e-300)))
        hi = max(hi, 1.0)
        while _mass(hi, base, w, r, delta) < target:
            hi *= 2.0
        lam = brentq(lambda t: _mass(t, base, w, r, delta) - target, 0.0, hi,
                     xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    a_new = np.minimum(1.0, base * np.exp(np.minimum(lam / w, 700.0)))
    a_new[r] = delta
    if abs(a_new.sum() - target) > max(tol, 1e-10) and lam > 0:
        raise PagingError(f"mass residual {a_new.sum() - target:.3e} after root find")
    return (a_new, float(lam)) if return_multiplier else a_new


# -- divergences and potential ------------------------------------------------

def kl(x, x_ref, w, skip: Optional[int] = None) -> float:
    """Weighted unnormalised KL; ``skip`` drops one coordinate."""
    terms = np.asarray(w) * kl_div(np.asarray(x, float), np.asarray(x_ref, float))
    if skip is not None:
        terms = np.delete(terms, skip)
    return float(terms.sum())


def pkl(x, x_ref, w, skip: Optional[int] = None) -> float:
    """``sum w x log(x / x_ref)`` without the linear terms."""
    terms = np.asarray(w) * rel_entr(np.asarray(x, float), np.asarray(x_ref, float))
    if skip is not None:
        terms = np.delete(terms, skip)
    return float(terms.sum())


def paging_potential(b, a, w) -> float:
    """``sum_{i : b_i = 1} w_i log(1 / a_i)``."""
    return pkl(b, a, w)


def weighted_l1(v, w) -> float:
    return float(np.dot(w, np.abs(v)))


# -- runs -----------------------------------------------------------------------

@dataclass
class PagingStep:
    t: int
    request: int
    movement: float
    positive_movement: float
    multiplier: float

    def to_dict(self) -> dict:
        return {"t": self.t, "request": self.request, "movement": self.movement,
                "positive_movement": self.positive_movement, "multiplier": self.multiplier}


@dataclass
class PagingTrace:
    params: PagingParams
    initial: list
    requests: list
    states: list                      # a^0 .. a^T
    steps: list = field(default_factory=list)

    @property
    def total_movement(self) -> float:
        return float(sum(s.movement for s in self.steps))

    @property
    def total_positive(self) -> float:
        return float(sum(s.positive_movement for s in self.steps))


def paging_run(weights, k: int, h: int, initial: Sequence[int], requests: Sequence[int]) -> PagingTrace:
    params = PagingParams(np.asarray(weights, dtype=float), k, h)
    a = initial_vector(params, initial)
    trace = PagingTrace(params, [int(i) for i in initial], [int(r) for r in requests], [a.copy()])
    w = params.weights
    for t, r in enumerate(trace.requests, start=1):
        if not 0 <= r < params.n:
            raise PagingError(f"request {r} out of range")
        a_new, lam = paging_project(a, r, params, return_multiplier=True)
        d = a_new - a
        trace.steps.append(PagingStep(t, r, weighted_l1(d, w), float(np.dot(w, np.maximum(d, 0.0))), lam))
        trace.states.append(a_new)
        a = a_new
    return trace


def step_properties(a_prev, a_new, r: int, params: PagingParams) -> dict:
    """Residuals of the per-step invariants (all should be ~0)."""
    others = np.delete(a_new - a_prev, r)
    return {
        "request_at_delta": abs(a_new[r] - params.delta),
        "others_nondecreasing": float(max(0.0, -others.min())) if len(others) else 0.0,
        "mass": abs(a_new.sum() - params.mass),
        "range": float(max(0.0, params.delta - a_new.min(), a_new.max() - 1.0)),
    }


def aux_pythagorean_gap(b, a_prev, a_new, r: int, w) -> float:
    """``D(b||a_prev) - D(b||a_new) - D(a_new||a_prev)`` over coordinates other
    than ``r``; nonnegative for every ``b`` in the request body."""
    return kl(b, a_prev, w, r) - kl(b, a_new, w, r) - kl(a_new, a_prev, w, r)


def step_accounting_gap(b_prev, b_new, a_prev, a_new, params: PagingParams) -> float:
    """``log(1/delta) * sum w (db)^+ - [sum w (da)^+ + Phi_t - Phi_{t-1}]`` (>= 0)."""
    w = params.weights
    alg = float(np.dot(w, np.maximum(a_new - a_prev, 0.0)))
    dphi = paging_potential(b_new, a_new, w) - paging_potential(b_prev, a_prev, w)
    opt = float(np.dot(w, np.maximum(np.asarray(b_new) - np.asarray(b_prev), 0.0)))
    return np.log(1.0 / params.delta) * opt - alg - dphi


def anti_paging_vectors(caches, n: int) -> list[np.ndarray]:
    """Cache sets to Boolean ``b`` (1 = page outside the cache)."""
    out = []
    for c in caches:
        b = np.ones(n)
        b[list(c)] = 0.0
        out.append(b)
    return out


def paging_bound(trace: PagingTrace, comparator: Sequence[np.ndarray]) -> dict:
    """Aggregate movement against a comparator trajectory ``b^0 .. b^T``.

    ``bound`` uses ``C' = Phi(b^0||a^0) + 2 sum w``; ``strict_bound`` is the
    telescoped form ``2 log(1/delta) OPT+ + 2 Phi_0 + W(a^0) - W(a^T)``.
    """
    p = trace.params
    w = p.weights
    bs = [np.asarray(b, dtype=float) for b in comparator]
    if len(bs) != len(trace.states):
        raise PagingError("comparator must have one vector per state")
    opt_pos = sum(float(np.dot(w, np.maximum(bs[t] - bs[t - 1], 0.0))) for t in range(1, len(bs)))
    opt_full = sum(weighted_l1(bs[t] - bs[t - 1], w) for t in range(1, len(bs)))
    phi0 = paging_potential(bs[0], trace.states[0], w)
    L = np.log(1.0 / p.delta)
    c_prime = phi0 + 2.0 * float(w.sum())
    W0 = float(np.dot(w, trace.states[0]))
    WT = float(np.dot(w, trace.states[-1]))
    return {
        "alg": trace.total_movement,
        "alg_positive": trace.total_positive,
        "opt_positive": opt_pos,
        "opt_full": opt_full,
        "phi0": phi0,
        "c_prime": c_prime,
        "bound": 2.0 * L * opt_pos + c_prime,
        "strict_bound": 2.0 * L * opt_pos + 2.0 * phi0 + W0 - WT,
    }
