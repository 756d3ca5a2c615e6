"""Online fractional set cover by KL projection onto one covering row.

Rows ``a_t`` (nonnegative, usually Boolean) arrive online and the point is
projected onto ``{x : <a_t, x> >= 1}`` under the unnormalised KL
divergence.  The minimiser is a multiplicative update

    z_i = a_prev_i * exp(lam * a_ti),    lam >= 0,

so the solution only grows and stays feasible for every earlier row.
Starting from ``a^0 = 1/n`` the final cost is at most
``ln(n) * OPT + 1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import kl_div, rel_entr


COVER_TOL = 1e-12


class SetCoverError(ValueError):
    pass


def _as_row(row, n: Optional[int] = None) -> np.ndarray:
    row = np.asarray(row, dtype=float)
    if row.ndim != 1 or (n is not None and len(row) != n):
        raise SetCoverError(f"row must be a vector of length {n}")
    if np.any(row < 0):
        raise SetCoverError("covering rows must be nonnegative")
    if not np.any(row > 0):
        raise SetCoverError("all-zero row cannot be covered")
    return row


def sc_project(a_prev, row) -> tuple[np.ndarray, float]:
    """Return ``(a_new, lam)``.

    >>> a, lam = sc_project([0.5, 0.5], [1, 0])
    >>> a.tolist(), bool(abs(lam - np.log(2)) < 1e-12)
    ([1.0, 0.5], True)
    """
    a_prev = np.asarray(a_prev, dtype=float)
    row = _as_row(row, len(a_prev))
    if np.any(a_prev <= 0):
        raise SetCoverError("current point must be strictly positive")
    cover = float(row @ a_prev)
    if cover >= 1.0 - COVER_TOL:          # rounding from an earlier step
        return a_prev.copy(), 0.0
    support = row > 0
    if np.all(row[support] == row[support][0]):
        # uniform support: <row, a e^{lam c}> = e^{lam c} <row, a>
        lam = float(np.log(1.0 / cover) / row[support][0])
    else:
        def excess(t):
            return float(row @ (a_prev * np.exp(t * row))) - 1.0
        hi = 1.0
        while excess(hi) < 0:
            hi *= 2.0
        lam = brentq(excess, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    a_new = a_prev * np.exp(lam * row)
    return a_new, lam


def divergence(x, x_ref) -> float:
    return float(kl_div(np.asarray(x, float), np.asarray(x_ref, float)).sum())


def pdiv(x, x_ref) -> float:
    """``sum x log(x / x_ref)``; with Boolean ``x`` this is the potential."""
    return float(rel_entr(np.asarray(x, float), np.asarray(x_ref, float)).sum())


@dataclass
class SetCoverTrace:
    n: int
    rows: list
    states: list                               # a^0 .. a^T
    multipliers: list = field(default_factory=list)

    @property
    def cost(self) -> float:
        return float(self.states[-1].sum())

    def step_costs(self) -> list[float]:
        return [float((self.states[t] - self.states[t - 1]).sum())
                for t in range(1, len(self.states))]


def sc_run(rows: Sequence, n: Optional[int] = None) -> SetCoverTrace:
    """Process ``rows`` online from ``a^0 = 1/n``."""
    rows = [np.asarray(r, dtype=float) for r in rows]
    if n is None:
        if not rows:
            raise SetCoverError("n is required when there are no rows")
        n = len(rows[0])
    a = np.full(n, 1.0 / n)
    trace = SetCoverTrace(n, rows, [a.copy()])
    for row in rows:
        a, lam = sc_project(a, row)
        trace.states.append(a)
        trace.multipliers.append(lam)
    return trace


def step_audit(trace: SetCoverTrace, comparator: Sequence[np.ndarray], t: int,
               tol: float = 1e-9) -> dict:
    """Per-step chain for step ``t`` (1-based) against Boolean ``b^0 .. b^T``.

    ``opt_move``: potential rise when OPT flips entries on, at most
    ``log(1/delta)`` per flip.  ``shadow``: the reverse-Pythagorean form
    ``Pdiv(a^t||a^{t-1}) + Phi(b^t||a^t) - Phi(b^t||a^{t-1}) <= 0``.
    ``movement``: ``||a^t - a^{t-1}||_1 <= Pdiv(a^t||a^{t-1})``.
    ``combined``: cost plus potential change within ``log(1/delta)`` per flip.
    Residuals are ``lhs - rhs`` (pass when ``<= tol``).
    """
    a_prev, a_new = trace.states[t - 1], trace.states[t]
    b_prev, b_new = np.asarray(comparator[t - 1], float), np.asarray(comparator[t], float)
    L = np.log(trace.n)
    flips_on = float(np.maximum(b_new - b_prev, 0.0).sum())
    monotone = bool(np.all(b_new >= b_prev))
    out = {}
    if monotone:
        out["opt_move"] = pdiv(b_new, a_prev) - pdiv(b_prev, a_prev) - L * flips_on
    else:
        out["opt_move"] = None
    shadow = pdiv(a_new, a_prev)
    out["shadow"] = shadow + pdiv(b_new, a_new) - pdiv(b_new, a_prev)
    out["movement"] = float(np.abs(a_new - a_prev).sum()) - shadow
    out["combined"] = (float((a_new - a_prev).sum()) + pdiv(b_new, a_new) - pdiv(b_prev, a_prev)
                       - L * flips_on) if monotone else None
    out["passed"] = all(v is None or v <= tol for v in out.values())
    return out


def reverse_pythagorean_gap(y, a_prev, a_new) -> float:
    """``D(y||a_prev) - D(y||a_new) - D(a_new||a_prev)`` (>= 0 for covering ``y``)."""
    return divergence(y, a_prev) - divergence(y, a_new) - divergence(a_new, a_prev)
