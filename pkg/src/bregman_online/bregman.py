"""Shifted multilevel entropy divergence and Bregman projection onto ``P_t``.

The divergence on atoms is

    D(x || x') = sum_u w_u sum_j  xt log(xt / xt') - xt + xt',   xt = x + shift

and the projection step solves ``min_{x in P_t} D(x || x_prev)`` with
``P_t = P  and  x_{r_t,1} <= delta``.  Box constraints are not imposed; the
minimiser lies in the box anyway and :mod:`bregman_online.kserver` checks it.

Two solvers are provided:

``project``
    Constraint generation over the canonical subset constraints, with the
    separable dual maximised by an active-set Newton method.  Multipliers
    double as the dual certificate.
``reference_project``
    Dual coordinate ascent (Hildreth's method, i.e. Bregman-Dykstra for
    half-spaces) over every subset constraint.  Exponential in the fanout;
    meant for instances with at most ~16 atoms.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import kl_div, rel_entr

from .polytope import (
    PolytopeSpec,
    RequestCap,
    RootBound,
    SubsetConstraint,
    canonical_slacks,
    check_membership,
    violated_subsets,
)
from .tree import WeightedTree

TOL_FEAS = 1e-9
TOL_OPT = 1e-6
MAX_SWEEPS = 100_000


class ProjectionError(RuntimeError):
    """Infeasible start point or solver failure."""


class ConvergenceError(ProjectionError):
    pass


@dataclass(frozen=True)
class DivergenceParams:
    weights: np.ndarray     # per-atom weights (w_u repeated |L_u| times)
    shift: float

    def __post_init__(self):
        if np.any(self.weights <= 0):
            raise ValueError("divergence weights must be positive")
        if self.shift < 0:
            raise ValueError("shift must be nonnegative")

    @classmethod
    def for_tree(cls, tree: WeightedTree, shift: float) -> "DivergenceParams":
        return cls(tree.atom_weights, float(shift))


def _shifted(x, params: DivergenceParams) -> np.ndarray:
    xt = np.asarray(x, dtype=float) + params.shift
    if xt.shape != params.weights.shape:
        raise ValueError(f"expected {params.weights.shape[0]} atoms, got shape {xt.shape}")
    if np.any(xt < 0) or (params.shift > 0 and np.any(xt <= 0)):
        raise ValueError("entry below -shift: divergence undefined")
    return xt


def divergence(x, x_ref, params: DivergenceParams) -> float:
    """``D(x || x_ref)``; nonnegative and zero iff the points agree."""
    return float(np.dot(params.weights, kl_div(_shifted(x, params), _shifted(x_ref, params))))


def pdiv(x, x_ref, params: DivergenceParams) -> float:
    """``sum w xt log(xt / xt_ref)``, the divergence without its linear terms."""
    return float(np.dot(params.weights, rel_entr(_shifted(x, params), _shifted(x_ref, params))))


def pythagorean_gap(y, x_prev, x_new, params: DivergenceParams) -> float:
    """``D(y||x_prev) - D(y||x_new) - D(x_new||x_prev)``.

    Nonnegative whenever ``x_new`` is the projection of ``x_prev`` onto a
    convex set containing ``y``.
    """
    return (divergence(y, x_prev, params) - divergence(y, x_new, params)
            - divergence(x_new, x_prev, params))


def weighted_mass(x, params: DivergenceParams) -> float:
    """``W(x) = sum_u w_u sum_j x_{u,j}``."""
    return float(np.dot(params.weights, x))


def potential(y, x, params: DivergenceParams, check_range: bool = True) -> float:
    """``Phi(y, x) = sum_u w_u sum_j yt log(yt / xt)`` for Boolean ``y``.

    With ``x`` in the unit box each unweighted term lies in
    ``[-s log(1 + 1/s), (1 + s) log(1 + 1/s)]`` for shift ``s``; this is
    asserted when ``check_range`` is set.
    """
    y = np.asarray(y, dtype=float)
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("potential expects a Boolean comparator")
    terms = rel_entr(_shifted(y, params), _shifted(x, params))
    s = params.shift
    if check_range and s > 0:
        lo = -s * np.log1p(1 / s) - 1e-9
        hi = (1 + s) * np.log1p(1 / s) + 1e-9
        if terms.min() < lo or terms.max() > hi:
            raise AssertionError("potential term outside its range; is x in [0,1]?")
    return float(np.dot(params.weights, terms))


# -- certificates and results -----------------------------------------------------

@dataclass
class DualCertificate:
    gamma: float
    root: np.ndarray                            # lambda_{r,j}, j = 1..n
    subsets: list[tuple[SubsetConstraint, float]]

    def a_b(self, tree: WeightedTree) -> tuple[np.ndarray, np.ndarray]:
        """Per-atom ``a_{u,j}`` and ``b_{u,j}`` sums of multipliers."""
        a = np.zeros(tree.N)
        b = np.zeros(tree.N)
        a[: tree.n] += self.root
        for S, lam in self.subsets:
            a[list(S.atoms)] += lam
            off = tree.atom_offset[S.node]
            b[off: off + S.size] += lam
        return a, b

    def min_multiplier(self) -> float:
        vals = [self.gamma, *self.root.tolist(), *(lam for _, lam in self.subsets)]
        return float(min(vals))

    def to_dict(self, tree: WeightedTree) -> dict:
        return {
            "gamma": self.gamma,
            "root": self.root.tolist(),
            "subsets": [[tree.ids[S.node], list(S.atoms), lam] for S, lam in self.subsets if lam > 0],
        }


@dataclass
class ProjectionResult:
    x: np.ndarray
    converged: bool
    iterations: int
    feasibility: float
    certificate: Optional[DualCertificate] = None
    stationarity: Optional[float] = None
    complementarity: Optional[float] = None
    active_set: int = 0
    rounds: int = 0
    method: str = "newton"

    def diagnostics(self) -> dict:
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "rounds": self.rounds,
            "feasibility": self.feasibility,
            "stationarity": self.stationarity,
            "complementarity": self.complementarity,
            "active_set": self.active_set,
            "method": self.method,
            "certificate": self.certificate is not None,
        }


# -- shared helpers ------------------------------------------------------------------

def _base_constraints(spec: PolytopeSpec) -> list:
    tree = spec.tree
    bounds = spec.root_bounds()
    cons = [RequestCap(spec.request_atom, spec.delta)]
    cons += [RootBound(j + 1, float(bounds[j])) for j in range(tree.n)]
    return cons


def _feasibility(x, spec: PolytopeSpec) -> float:
    tree = spec.tree
    worst = max(0.0, float(x[spec.request_atom] - spec.delta))
    worst = max(worst, float(np.max(spec.root_bounds() - x[: tree.n])))
    for u in tree.internal_nodes():
        slack, _ = canonical_slacks(x, tree, u)
        worst = max(worst, float(-slack.min()))
    return worst


def _validate_start(x_prev, spec: PolytopeSpec, tol: float) -> np.ndarray:
    if spec.request is None:
        raise ValueError("projection needs a request leaf")
    x_prev = np.asarray(x_prev, dtype=float)
    if x_prev.shape != (spec.tree.N,) or not np.all(np.isfinite(x_prev)):
        raise ProjectionError("start point has the wrong shape or non-finite entries")
    rep = check_membership(x_prev, spec.with_request(None), tol=tol)
    if not rep.member:
        raise ProjectionError(f"infeasible start point: {rep.violations[:3]}")
    return x_prev


def _certificate(cons, mu, spec) -> DualCertificate:
    gamma = 0.0
    root = np.zeros(spec.tree.n)
    subsets = []
    for c, m in zip(cons, mu):
        if isinstance(c, RequestCap):
            gamma += m
        elif isinstance(c, RootBound):
            root[c.slot - 1] += m
        else:
            subsets.append((c, float(m)))
    return DualCertificate(float(gamma), root, subsets)


def stationarity_residual(x_new, x_prev, cert: DualCertificate, spec: PolytopeSpec,
                          params: DivergenceParams) -> float:
    """``max |w log(xt/xt_prev) - (a - b - gamma e_{r_t})|`` over atoms."""
    tree = spec.tree
    xt = np.asarray(x_new) + params.shift
    pt = np.asarray(x_prev) + params.shift
    a, b = cert.a_b(tree)
    rhs = a - b
    rhs[spec.request_atom] -= cert.gamma
    ok = (xt > 0) & (pt > 0)
    lhs = np.zeros_like(xt)
    lhs[ok] = params.weights[ok] * np.log(xt[ok] / pt[ok])
    return float(np.max(np.abs(lhs - rhs)[ok], initial=0.0))


def _finish(x, mu, cons, rows, rhs, spec, params, x_prev, iterations, rounds, method, converged):
    cert = _certificate(cons, mu, spec)
    slack = rhs - rows @ x
    return ProjectionResult(
        x=x,
        converged=converged,
        iterations=iterations,
        feasibility=_feasibility(x, spec),
        certificate=cert,
        stationarity=stationarity_residual(x, x_prev, cert, spec, params),
        complementarity=float(np.max(np.abs(mu * slack), initial=0.0)),
        active_set=int(np.count_nonzero(mu > 0)),
        rounds=rounds,
        method=method,
    )


def _unchanged(x_prev, spec, params, method) -> ProjectionResult:
    cons = _base_constraints(spec)
    mu = np.zeros(len(cons))
    rows = np.array([c.row(spec.tree)[0] for c in cons])
    rhs = np.array([c.row(spec.tree)[1] for c in cons])
    return _finish(x_prev.copy(), mu, cons, rows, rhs, spec, params, x_prev, 0, 0, method, True)


# -- production solver ----------------------------------------------------------------

def _dual_newton(rows, rhs, pt, w, shift, mu, tol, max_iter):
    """Maximise the separable dual over ``mu >= 0`` with an active-set Newton method.

    Primal point: ``xt = pt * exp(-(rows.T @ mu) / w)``.  The free set is
    optimised by min-norm Newton steps, truncated at the ``mu >= 0``
    boundary; directions in the null space of the reduced Hessian (linearly
    dependent constraints) are followed exactly to the boundary.  Fixed
    multipliers are released once the face problem is solved.
    Returns ``(mu, xt, iterations, converged)``.
    """
    bb = rhs + shift * rows.sum(axis=1)
    live = pt > 0

    def primal(m):
        e = np.clip(-(rows.T @ m) / w, -700.0, 700.0)
        return np.where(live, pt * np.exp(e), 0.0)

    def dual(m, xt):
        return float(np.dot(w, pt - xt) - np.dot(m, bb))

    mu = mu.copy()
    free = mu > 0
    xt = primal(mu)
    g = dual(mu, xt)
    # dual gains below this are lost in rounding
    noise = 1e-14 * (1.0 + float(np.dot(w, pt)))

    def release(grad):
        cand = np.flatnonzero(~free & (grad > tol))
        if len(cand) == 0:
            return False
        # one at a time: the released multiplier then moves up
        free[cand[int(np.argmax(grad[cand]))]] = True
        return True

    for it in range(1, max_iter + 1):
        grad = rows @ xt - bb
        pg = np.where(mu > 0, grad, np.maximum(grad, 0.0))
        worst = np.max(np.abs(pg), initial=0.0)
        if worst <= tol:
            return mu, xt, it - 1, True
        F = np.flatnonzero(free)
        if len(F) == 0 or np.max(np.abs(grad[F])) <= tol:
            if not release(grad):
                return mu, xt, it - 1, bool(worst <= 1e3 * tol)
            continue
        gF = grad[F]
        R = rows[F]
        H = (R * (xt / w)) @ R.T
        d = np.linalg.lstsq(H, gF, rcond=1e-13)[0]
        resid = gF - H @ d
        linear = np.linalg.norm(resid) > 1e-7 * max(1.0, np.linalg.norm(gF))
        if linear:
            d = resid
        neg = d < 0
        alpha_max = np.min(-mu[F][neg] / d[neg]) if neg.any() else np.inf
        if linear and not np.isfinite(alpha_max):
            raise ProjectionError("dual unbounded: constraints inconsistent")
        alpha = alpha_max if linear else min(1.0, alpha_max)
        # dual values cannot rank steps whose predicted gain is below rounding
        tiny = not linear and 0.5 * float(np.dot(gF, d)) <= noise
        accepted = False
        for _ in range(1 if tiny else 60):
            trial = mu.copy()
            trial[F] = np.maximum(0.0, mu[F] + alpha * d)
            xt_trial = primal(trial)
            g_trial = dual(trial, xt_trial)
            if tiny or g_trial >= g - 1e-14 * (1.0 + abs(g)):
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            if not release(grad):
                return mu, xt, it, bool(worst <= 1e3 * tol)
            continue
        if alpha >= alpha_max:
            hit = F[neg][(-mu[F][neg] / d[neg]) <= alpha_max * (1 + 1e-12)]
            trial[hit] = 0.0
            xt_trial = primal(trial)
            g_trial = dual(trial, xt_trial)
        mu, xt, g = trial, xt_trial, g_trial
        free &= mu > 0
    return mu, xt, max_iter, False


def project(x_prev, spec: PolytopeSpec, params: Optional[DivergenceParams] = None,
            tol: float = TOL_FEAS, max_rounds: int = 200, max_newton: int = 500,
            raise_on_failure: bool = True) -> ProjectionResult:
    """Bregman projection of ``x_prev`` onto ``P_t`` for ``spec.request``.

    Parameters
    ----------
    x_prev : array of length ``N``
        Previous point; must lie in ``P_delta`` (checked to ``1e-7``).
    spec : PolytopeSpec
        Tree, ``h``, ``delta`` and the request leaf number.
    params : DivergenceParams, optional
        Defaults to the tree weights with shift ``spec.delta``.
    tol : float
        Target feasibility residual.  Internally the dual is solved to
        ``1e-3 * tol``.

    Raises
    ------
    ProjectionError
        Infeasible start.
    ConvergenceError
        The solver did not reach ``tol`` (unless ``raise_on_failure=False``,
        in which case the result carries ``converged=False``).
    """
    tree = spec.tree
    params = params or DivergenceParams.for_tree(tree, spec.delta)
    x_prev = _validate_start(x_prev, spec, tol=1e-7)
    if x_prev[spec.request_atom] <= spec.delta:
        return _unchanged(x_prev, spec, params, "newton")

    pt = x_prev + params.shift
    w = params.weights
    cons = _base_constraints(spec)
    seen = set()
    for u in tree.internal_nodes():
        slack, order = canonical_slacks(x_prev, tree, u)
        for s in np.flatnonzero(slack <= 1e-9):
            S = SubsetConstraint(u, tuple(sorted(int(a) for a in order[: s + 1])))
            if S not in seen:
                seen.add(S)
                cons.append(S)
    mu = np.zeros(len(cons))
    inner_tol = 1e-3 * tol
    total_it = 0
    ok = False
    for rnd in range(1, max_rounds + 1):
        rows = np.array([c.row(tree)[0] for c in cons])
        rhs = np.array([c.row(tree)[1] for c in cons])
        mu, xt, its, ok = _dual_newton(rows, rhs, pt, w, params.shift, mu, inner_tol, max_newton)
        total_it += its
        x = xt - params.shift
        new = [S for S in (SubsetConstraint(S.node, tuple(sorted(S.atoms)))
                           for S in violated_subsets(x, tree, inner_tol)) if S not in seen]
        if not new:
            break
        for S in new:
            seen.add(S)
            cons.append(S)
        mu = np.concatenate([mu, np.zeros(len(new))])
    x = xt - params.shift
    res = _finish(x, mu, cons, rows, rhs, spec, params, x_prev, total_it, rnd, "newton",
                  ok and not new)
    res.converged = res.converged and res.feasibility <= tol
    if not res.converged and raise_on_failure:
        raise ConvergenceError(f"projection did not converge (feasibility {res.feasibility:.3g})")
    return res


# -- reference solver ------------------------------------------------------------------

def all_constraints(spec: PolytopeSpec, max_children: int = 16) -> list:
    """Root bounds, the request cap and every subset constraint."""
    tree = spec.tree
    cons = _base_constraints(spec)
    for u in tree.internal_nodes():
        ch = tree.child_atoms(u)
        if len(ch) > max_children:
            raise ValueError("too many child atoms for exhaustive enumeration")
        for size in range(1, len(ch) + 1):
            for S in itertools.combinations(ch.tolist(), size):
                cons.append(SubsetConstraint(u, tuple(S)))
    return cons


def _coordinate_step(c_idx, c_val, xt_s, w_s, target, lo):
    """Largest-dual step ``theta >= lo`` solving ``sum c xt exp(-theta c/w) = target``."""
    def phi(th):
        return float(np.dot(c_val, xt_s * np.exp(np.clip(-th * c_val / w_s, -700, 700)))) - target

    if phi(lo) <= 0.0:
        return lo
    # phi is nonincreasing; bracket the root above lo
    a = lo
    step = 1.0
    b = max(lo, 0.0) + step
    while phi(b) > 0.0:
        a = b
        step *= 2.0
        b = b + step
        if step > 1e12:
            return b
    # safeguarded Newton inside [a, b]
    th = 0.5 * (a + b)
    for _ in range(200):
        e = xt_s * np.exp(np.clip(-th * c_val / w_s, -700, 700))
        f = float(np.dot(c_val, e)) - target
        if f > 0:
            a = th
        else:
            b = th
        if abs(f) <= 1e-15 * (1.0 + abs(target)) or b - a <= 1e-16 * (1.0 + abs(th)):
            break
        df = -float(np.dot(c_val * c_val / w_s, e))
        nxt = th - f / df if df < 0 else 0.5 * (a + b)
        th = nxt if a < nxt < b else 0.5 * (a + b)
    return th


def reference_project(x_prev, spec: PolytopeSpec, params: Optional[DivergenceParams] = None,
                      tol: float = 1e-11, max_sweeps: int = MAX_SWEEPS,
                      raise_on_failure: bool = True) -> ProjectionResult:
    """Exhaustive-constraint projection by cyclic dual coordinate ascent."""
    tree = spec.tree
    params = params or DivergenceParams.for_tree(tree, spec.delta)
    x_prev = _validate_start(x_prev, spec, tol=1e-7)
    if x_prev[spec.request_atom] <= spec.delta:
        return _unchanged(x_prev, spec, params, "reference")
    cons = all_constraints(spec)
    rows = np.array([c.row(tree)[0] for c in cons])
    rhs = np.array([c.row(tree)[1] for c in cons])
    bb = rhs + params.shift * rows.sum(axis=1)
    supports = [np.flatnonzero(r) for r in rows]
    w = params.weights
    xt = x_prev + params.shift
    mu = np.zeros(len(cons))
    converged = False
    sweep = 0
    for sweep in range(1, max_sweeps + 1):
        resid = rows @ xt - bb
        pg = np.where(mu > 0, resid, np.maximum(resid, 0.0))
        if np.max(np.abs(pg)) <= tol:
            converged = True
            break
        for k in np.flatnonzero((mu > 0) | (resid > 0)):
            idx = supports[k]
            cv = rows[k, idx]
            th = _coordinate_step(idx, cv, xt[idx], w[idx], bb[k], -mu[k])
            if th != 0.0:
                mu[k] += th
                xt[idx] = xt[idx] * np.exp(np.clip(-th * cv / w[idx], -700, 700))
    x = xt - params.shift
    res = _finish(x, mu, cons, rows, rhs, spec, params, x_prev, sweep, 1, "reference", converged)
    if not converged and raise_on_failure:
        raise ConvergenceError(f"reference solver hit {max_sweeps} sweeps")
    return res
