"""Experiment orchestration: configs, runs, audits and report files.

A run produces three files:

* ``trace.jsonl``: one JSON object per line; an ``instance`` header line
  followed by one ``step`` line per request;
* ``summary.csv``: one row per instance with costs, the additive-corrected
  empirical ratio and the theoretical ratio bound;
* ``plot.csv``: per-step cumulative costs for plotting.

Outputs depend only on the config (including its seed); floats are
written with ``repr`` so re-runs are byte-identical.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import generators as gen
from . import kserver, offline, paging, setcover
from .bregman import DivergenceParams, pythagorean_gap
from .instances import Instance, InstanceError, instance_from_dict, load_instance
from .polytope import sample_integer_points, sample_members

SCHEMA_VERSION = 1
AUDIT_LEVELS = ("off", "primal", "full")
ALGORITHMS = ("kserver", "paging", "setcover")
DEFAULT_TOLERANCES = {"projection": 1e-9, "audit": 1e-7, "structural": 1e-8, "bound": 1e-6}
SUMMARY_COLUMNS = ["instance_id", "problem", "D", "n", "k", "h", "delta", "alg_cost",
                   "alg_positive", "opt_cost", "opt_positive", "additive", "empirical_ratio",
                   "raw_ratio", "theoretical_bound", "bound_holds", "audits_passed",
                   "audits_failed", "audits_skipped", "seed"]
PLOT_COLUMNS = ["instance_id", "step", "alg_cumulative", "alg_positive_cumulative",
                "opt_positive_cumulative"]


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    algorithm: str
    instance: dict
    audit: str = "primal"
    output: dict = field(default_factory=lambda: {"dir": "results"})
    tolerances: dict = field(default_factory=dict)
    name: str = "experiment"
    workers: int = 1
    samples_per_step: int = 20
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {self.schema_version}")
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {ALGORITHMS}")
        if self.audit not in AUDIT_LEVELS:
            raise ConfigError(f"audit must be one of {AUDIT_LEVELS}")
        if not isinstance(self.instance, dict) or not (
                {"file", "files", "generator"} & set(self.instance)):
            raise ConfigError("instance needs 'file', 'files' or 'generator'")
        if "generator" in self.instance and "seed" not in self.instance:
            raise ConfigError("generated instances need a seed")
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise ConfigError(f"unknown tolerances {sorted(unknown)}")
        if int(self.workers) < 1:
            raise ConfigError("workers must be >= 1")

    @property
    def tol(self) -> dict:
        return {**DEFAULT_TOLERANCES, **self.tolerances}

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        known = set(cls.__dataclass_fields__)
        extra = set(doc) - known
        if extra:
            raise ConfigError(f"unknown config fields {sorted(extra)}")
        if "schema_version" not in doc:
            raise ConfigError("config needs a schema_version")
        try:
            return cls(**doc)
        except TypeError as e:
            raise ConfigError(str(e)) from e

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON ({e})") from e
        return cls.from_dict(doc)


# -- instance materialisation -------------------------------------------------------

def _draw(rng, spec, lo_cap=None, hi_cap=None):
    """An int, or a uniform draw from an inclusive ``[lo, hi]`` range."""
    if isinstance(spec, (list, tuple)):
        lo, hi = int(spec[0]), int(spec[1])
    else:
        lo = hi = int(spec)
    if lo_cap is not None:
        lo = max(lo, lo_cap)
    if hi_cap is not None:
        hi = min(hi, hi_cap)
    if lo > hi:
        raise ConfigError(f"empty range {spec} (caps {lo_cap}, {hi_cap})")
    return int(rng.integers(lo, hi + 1))


def _requests(spec: dict, n: int, k: int, h: int, initial, seed: int, tree=None, weights=None):
    model = spec.get("model", "uniform_random")
    length = int(spec.get("length", 20))
    params = {"n": n, "k": k, "h": h, "length": length, "initial": initial}
    if "leaves" in spec:
        params["leaves"] = spec["leaves"]
    if tree is not None:
        params["tree"] = tree
    if weights is not None:
        params["weights"] = weights
    return gen.generate_requests(model, params, seed)


def generate_instance(problem: str, spec: dict, seed: int) -> Instance:
    """Build one instance from a generator spec with the given seed."""
    rng = np.random.default_rng(seed)
    meta = {"seed": seed, "rng": gen.RNG_NAME, "generator": spec}
    if problem == "kserver":
        tspec = dict(spec.get("tree", {"kind": "random"}))
        kind = tspec.pop("kind", "random")
        tseed = int(rng.integers(2**31))
        if kind == "hst":
            tree = gen.generate_hst(int(tspec.get("branching", 2)), int(tspec.get("depth", 2)),
                                    float(tspec.get("ratio", 0.5)),
                                    float(tspec.get("root_weight", 1.0)), tseed,
                                    float(tspec.get("jitter", 0.0)))
        elif kind == "random":
            tree = gen.generate_random_tree(_draw(rng, tspec.get("depth", [1, 3])),
                                            int(tspec.get("max_branching", 3)),
                                            int(tspec.get("min_leaves", 2)),
                                            int(tspec.get("max_leaves", 8)), tseed,
                                            float(tspec.get("decay", 0.5)))
        else:
            raise ConfigError(f"unknown tree kind {kind!r}")
        n = tree.n
        if n < 2:
            raise ConfigError("k-server instances need at least two leaves")
        k = _draw(rng, spec.get("k", [1, n - 1]), 1, n - 1)
        h = _draw(rng, spec.get("h", [1, k]), 1, k)
        initial = gen.random_initial(n, k, int(rng.integers(2**31)))
        reqs = _requests(spec.get("requests", {}), n, k, h, initial, int(rng.integers(2**31)),
                         tree=tree)
        return Instance("kserver", k, h, tree=tree, initial=initial, requests=reqs, meta=meta)
    if problem == "paging":
        n = _draw(rng, spec.get("n", [3, 8]), 2)
        k = _draw(rng, spec.get("k", [1, n - 1]), 1, n - 1)
        h = _draw(rng, spec.get("h", [1, k]), 1, k)
        wspec = spec.get("weights", {})
        if isinstance(wspec, list):
            weights = [float(v) for v in wspec]
            if len(weights) != n:
                raise ConfigError("explicit weights must have length n")
        else:
            weights = gen.paging_weights(n, int(rng.integers(2**31)),
                                         float(wspec.get("low", 1.0)), float(wspec.get("high", 100.0)))
        initial = gen.random_initial(n, k, int(rng.integers(2**31)))
        reqs = _requests(spec.get("requests", {}), n, k, h, initial, int(rng.integers(2**31)),
                         weights=weights)
        return Instance("paging", k, h, weights=weights, initial=initial, requests=reqs, meta=meta)
    if problem == "setcover":
        n = _draw(rng, spec.get("n", [4, 12]), 1)
        m = _draw(rng, spec.get("rows", [1, 30]), 0)
        rows = gen.generate_setcover(n, m, float(spec.get("density", 0.3)), int(rng.integers(2**31)))
        return Instance("setcover", n=n, rows=rows, meta=meta)
    raise ConfigError(f"unknown problem {problem!r}")


def materialise(config: ExperimentConfig, base: Optional[Path] = None) -> list[Instance]:
    src = config.instance
    base = base or Path(".")
    if "generator" in src:
        count = int(src.get("count", 1))
        seed = int(src["seed"])
        return [generate_instance(config.algorithm, src["generator"], gen.derive_seed(seed, i))
                for i in range(count)]
    files = [src["file"]] if "file" in src else list(src["files"])
    out = []
    for f in files:
        p = Path(f)
        inst = load_instance(p if p.is_absolute() else base / p)
        if inst.problem != config.algorithm:
            raise ConfigError(f"{f}: holds a {inst.problem} instance, config runs {config.algorithm}")
        out.append(inst)
    return out


# -- per-instance runs ----------------------------------------------------------------

@dataclass
class InstanceOutcome:
    instance_id: str
    summary: dict
    trace: list                 # dicts, one per line
    plot: list                  # rows
    audit_failures: int = 0
    error: Optional[str] = None


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        return repr(v)
    return str(v)


def _audit_counts(checks: list) -> tuple[int, int, int]:
    p = sum(1 for c in checks if c.get("pass") is True)
    f = sum(1 for c in checks if c.get("pass") is False)
    s = sum(1 for c in checks if "skipped" in c)
    return p, f, s


def _check(name, residual, tol):
    return {"name": name, "pass": bool(residual <= tol), "residual": float(residual)}


def _ratio(alg, additive, opt, bound, tol):
    raw = alg / opt if opt > 0 else None
    if opt > 0:
        ratio = (alg - additive) / opt
    else:
        ratio = None
    holds = alg <= bound * opt + additive + tol
    return ratio, raw, holds


def run_kserver(inst: Instance, iid: str, audit: str, tol: dict, samples: int, seed: int) -> InstanceOutcome:
    tree = inst.tree
    trace = kserver.run(tree, inst.k, inst.h, inst.initial, inst.requests, tol=tol["projection"])
    delta = trace.delta
    D = tree.D
    opt = None
    try:
        opt = offline.opt_kserver(tree, inst.h, inst.requests, inst.initial)
    except offline.OracleLimitError:
        opt = None
    ys = offline.kserver_comparator(opt, tree, inst.h) if opt is not None else None
    ids = tree.leaf_ids()
    checks_all = []
    lines = [{"kind": "instance", "instance_id": iid, "problem": "kserver", "D": D, "n": tree.n,
              "k": inst.k, "h": inst.h, "delta": delta, "seed": seed}]
    reports = kserver.audit_run(trace, ys, tol["audit"]) if (audit == "full" and ys is not None) else None
    params = DivergenceParams.for_tree(tree, delta)
    rng = np.random.default_rng(seed)
    cum = cum_pos = opt_cum = 0.0
    plot = [[iid, 0, 0.0, 0.0, 0.0]]
    w = tree.atom_weights
    for t, rec in enumerate(trace.records, start=1):
        r = rec.request
        checks = []
        if audit in ("primal", "full"):
            res = kserver.structural_residuals(trace.states[t], tree, inst.h, delta, r)
            for nm, v in res.items():
                checks.append(_check(nm, v, tol["structural"]))
            checks.append(_check("flow_direction",
                                 kserver.flow_direction_violation(trace.states[t - 1], trace.states[t], tree, r),
                                 tol["structural"]))
        if reports is not None:
            for nm, c in reports[t - 1].checks.items():
                checks.append({"name": nm, **c})
        if audit == "full" and samples > 0:
            pts = sample_integer_points(tree, inst.h, rng, samples // 2, cover=r)
            pts += sample_members(tree, inst.h, rng, samples - samples // 2, cover=r,
                                  anchors=(trace.states[t],))
            gap = min(pythagorean_gap(y, trace.states[t - 1], trace.states[t], params) for y in pts)
            checks.append(_check("reverse_pythagorean", -gap, tol["audit"]))
        checks_all += checks
        cum += rec.movement
        cum_pos += rec.positive_movement
        if ys is not None:
            opt_cum += float(np.dot(w, np.maximum(ys[t] - ys[t - 1], 0.0)))
        plot.append([iid, t, cum, cum_pos, opt_cum if ys is not None else None])
        line = {"kind": "step", "instance_id": iid, **rec.to_dict(), "request_id": ids[r]}
        line["checks"] = checks
        lines.append(line)
    if audit == "full":
        bad = kserver.uncrossing_audit(trace)
        checks_all.append({"name": "uncrossing", "pass": not bad, "residual": float(len(bad))})
    bound = 3 * (D + 1) * kserver.opt_move_constant(delta)
    if ys is not None:
        agg = kserver.aggregate_bound(trace, ys)
        additive = agg["bound"] - bound * agg["opt_positive"]
        ratio, raw, holds = _ratio(agg["alg_positive"], additive, agg["opt_positive"], bound, tol["bound"])
        if audit != "off":
            checks_all.append(_check("aggregate_bound", agg["alg_positive"] - agg["bound"], tol["bound"]))
        opt_cost, opt_pos = opt.cost, agg["opt_positive"]
    else:
        additive = ratio = raw = holds = opt_cost = opt_pos = None
    p, f, s = _audit_counts(checks_all)
    summary = {"instance_id": iid, "problem": "kserver", "D": D, "n": tree.n, "k": inst.k,
               "h": inst.h, "delta": delta, "alg_cost": trace.total_movement,
               "alg_positive": trace.total_positive, "opt_cost": opt_cost, "opt_positive": opt_pos,
               "additive": additive, "empirical_ratio": ratio, "raw_ratio": raw,
               "theoretical_bound": bound, "bound_holds": holds, "audits_passed": p,
               "audits_failed": f, "audits_skipped": s, "seed": seed}
    return InstanceOutcome(iid, summary, lines, plot, f)


def _sample_caches(rng, n, h, r, m):
    out = []
    others = [i for i in range(n) if i != r]
    for _ in range(m):
        size = int(rng.integers(1, h + 1))
        cache = [r] + [int(i) for i in rng.choice(others, size=size - 1, replace=False)]
        b = np.ones(n)
        b[cache] = 0.0
        out.append(b)
    return out


def run_paging(inst: Instance, iid: str, audit: str, tol: dict, samples: int, seed: int) -> InstanceOutcome:
    w = np.asarray(inst.weights)
    n = len(w)
    trace = paging.paging_run(w, inst.k, inst.h, inst.initial, inst.requests)
    p = trace.params
    try:
        opt = offline.opt_paging(w, inst.h, inst.requests, inst.initial)
        bs = offline.paging_comparator(opt, n)
    except offline.OracleLimitError:
        opt, bs = None, None
    rng = np.random.default_rng(seed)
    lines = [{"kind": "instance", "instance_id": iid, "problem": "paging", "D": 1, "n": n,
              "k": inst.k, "h": inst.h, "delta": p.delta, "seed": seed}]
    checks_all = []
    cum = cum_pos = opt_cum = 0.0
    plot = [[iid, 0, 0.0, 0.0, 0.0]]
    for t, st in enumerate(trace.steps, start=1):
        a_prev, a_new = trace.states[t - 1], trace.states[t]
        r = st.request
        checks = []
        if audit in ("primal", "full"):
            for nm, v in paging.step_properties(a_prev, a_new, r, p).items():
                checks.append(_check(nm, v, 1e-10))
        if audit == "full":
            if samples > 0:
                gap = min(paging.aux_pythagorean_gap(b, a_prev, a_new, r, w)
                          for b in _sample_caches(rng, n, inst.h, r, samples))
                checks.append(_check("aux_pythagorean", -gap, tol["audit"]))
            if bs is not None:
                checks.append(_check("step_accounting",
                                     -paging.step_accounting_gap(bs[t - 1], bs[t], a_prev, a_new, p),
                                     tol["audit"]))
        checks_all += checks
        cum += st.movement
        cum_pos += st.positive_movement
        if bs is not None:
            opt_cum += float(np.dot(w, np.maximum(bs[t] - bs[t - 1], 0.0)))
        plot.append([iid, t, cum, cum_pos, opt_cum if bs is not None else None])
        lines.append({"kind": "step", "instance_id": iid, **st.to_dict(), "checks": checks})
    bound = 2 * math.log(1 / p.delta)
    if bs is not None:
        agg = paging.paging_bound(trace, bs)
        additive = agg["c_prime"]
        ratio, raw, holds = _ratio(agg["alg"], additive, agg["opt_positive"], bound, tol["bound"])
        if audit != "off":
            checks_all.append(_check("aggregate_bound", agg["alg"] - agg["bound"], tol["bound"]))
        opt_cost = opt_pos = opt.cost
    else:
        additive = ratio = raw = holds = opt_cost = opt_pos = None
    pc, fc, sc = _audit_counts(checks_all)
    summary = {"instance_id": iid, "problem": "paging", "D": 1, "n": n, "k": inst.k, "h": inst.h,
               "delta": p.delta, "alg_cost": trace.total_movement, "alg_positive": trace.total_positive,
               "opt_cost": opt_cost, "opt_positive": opt_pos, "additive": additive,
               "empirical_ratio": ratio, "raw_ratio": raw, "theoretical_bound": bound,
               "bound_holds": holds, "audits_passed": pc, "audits_failed": fc, "audits_skipped": sc,
               "seed": seed}
    return InstanceOutcome(iid, summary, lines, plot, fc)


def run_setcover(inst: Instance, iid: str, audit: str, tol: dict, samples: int, seed: int) -> InstanceOutcome:
    n = inst.n
    trace = setcover.sc_run(inst.rows, n)
    try:
        opt = offline.opt_setcover(inst.rows, n) if inst.rows else None
    except offline.OracleLimitError:
        opt = None
    comp = offline.monotone_comparator(inst.rows, opt.configs[0], n) if opt is not None else None
    lines = [{"kind": "instance", "instance_id": iid, "problem": "setcover", "n": n,
              "rows": len(inst.rows), "delta": 1.0 / n, "seed": seed}]
    checks_all = []
    plot = [[iid, 0, float(trace.states[0].sum()), 0.0, 0.0]]
    for t in range(1, len(trace.states)):
        a_prev, a_new = trace.states[t - 1], trace.states[t]
        checks = []
        if audit in ("primal", "full"):
            checks.append(_check("monotone", float(max(0.0, (a_prev - a_new).max())), 0.0))
            cover = min(float(np.dot(r, a_new)) for r in inst.rows[:t])
            checks.append(_check("feasible", 1.0 - cover, 1e-12))
        if audit == "full" and comp is not None:
            res = setcover.step_audit(trace, comp, t, tol["audit"])
            for nm in ("opt_move", "shadow", "movement", "combined"):
                if res[nm] is None:
                    checks.append({"name": nm, "skipped": "comparator not monotone"})
                else:
                    checks.append(_check(nm, res[nm], 1e-9))
            checks.append(_check("reverse_pythagorean",
                                 -setcover.reverse_pythagorean_gap(comp[t], a_prev, a_new), tol["audit"]))
        checks_all += checks
        opt_t = float(comp[t].sum()) if comp is not None else None
        plot.append([iid, t, float(a_new.sum()), float(a_new.sum() - trace.states[0].sum()), opt_t])
        lines.append({"kind": "step", "instance_id": iid, "t": t, "multiplier": trace.multipliers[t - 1],
                      "cost": float(a_new.sum()), "checks": checks})
    bound = math.log(n) if n > 1 else 0.0
    alg = trace.cost
    if opt is not None:
        ratio, raw, holds = _ratio(alg, 1.0, opt.cost, bound, 1e-9)
        if audit != "off":
            checks_all.append(_check("aggregate_bound", alg - (bound * opt.cost + 1.0), 1e-9))
        opt_cost = opt.cost
    else:
        ratio = raw = None
        holds = alg <= 1.0 + 1e-12 if not inst.rows else None
        opt_cost = 0.0 if not inst.rows else None
    pc, fc, sc = _audit_counts(checks_all)
    summary = {"instance_id": iid, "problem": "setcover", "D": None, "n": n, "k": None, "h": None,
               "delta": 1.0 / n, "alg_cost": alg, "alg_positive": alg - 1.0, "opt_cost": opt_cost,
               "opt_positive": opt_cost, "additive": 1.0, "empirical_ratio": ratio, "raw_ratio": raw,
               "theoretical_bound": bound, "bound_holds": holds, "audits_passed": pc,
               "audits_failed": fc, "audits_skipped": sc, "seed": seed}
    return InstanceOutcome(iid, summary, lines, plot, fc)


RUNNERS = {"kserver": run_kserver, "paging": run_paging, "setcover": run_setcover}


def run_instance(inst: Instance, iid: str, audit: str = "primal", tol: Optional[dict] = None,
                 samples: int = 20, seed: int = 0) -> InstanceOutcome:
    tol = {**DEFAULT_TOLERANCES, **(tol or {})}
    return RUNNERS[inst.problem](inst, iid, audit, tol, samples, seed)


def _run_job(job):
    doc, iid, audit, tol, samples, seed = job
    return run_instance(instance_from_dict(doc), iid, audit, tol, samples, seed)


# -- experiment -------------------------------------------------------------------------

@dataclass
class ExperimentResult:
    outcomes: list
    paths: dict

    @property
    def audit_failures(self) -> int:
        return sum(o.audit_failures for o in self.outcomes)

    @property
    def bound_violations(self) -> int:
        return sum(1 for o in self.outcomes if o.summary.get("bound_holds") is False)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for r in rows:
        wr.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def run_experiment(config: ExperimentConfig, base: Optional[Path] = None,
                   out_dir: Optional[Path] = None) -> ExperimentResult:
    """Run every instance of ``config`` and write trace, summary and plot files."""
    instances = materialise(config, base)
    seed = int(config.instance.get("seed", 0))
    jobs = []
    for i, inst in enumerate(instances):
        iid = f"{config.name}-{i:04d}"
        jobs.append((inst.to_dict(), iid, config.audit, config.tol, int(config.samples_per_step),
                     gen.derive_seed(seed, 10_000 + i)))
    if int(config.workers) > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=int(config.workers)) as ex:
            outcomes = list(ex.map(_run_job, jobs))
    else:
        outcomes = [_run_job(j) for j in jobs]

    out = Path(out_dir) if out_dir is not None else Path(config.output.get("dir", "results"))
    out.mkdir(parents=True, exist_ok=True)
    paths = {k: out / config.output.get(k, default) for k, default in
             (("trace", "trace.jsonl"), ("summary", "summary.csv"), ("plot", "plot.csv"))}
    header = {"kind": "config", "config": config.to_dict(), "rng": gen.RNG_NAME}
    trace_lines = [json.dumps(header, sort_keys=True)]
    for o in outcomes:
        trace_lines += [json.dumps(line, sort_keys=True) for line in o.trace]
    paths["trace"].write_text("\n".join(trace_lines) + "\n")
    paths["summary"].write_text(_csv_text(SUMMARY_COLUMNS,
                                          [[o.summary[c] for c in SUMMARY_COLUMNS] for o in outcomes]))
    paths["plot"].write_text(_csv_text(PLOT_COLUMNS, [row for o in outcomes for row in o.plot]))
    return ExperimentResult(outcomes, paths)


# -- reports ----------------------------------------------------------------------------

def read_summary(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def summary_violations(rows: list[dict]) -> list[dict]:
    """Rows whose empirical ratio exceeds the theoretical bound."""
    return [r for r in rows if r.get("bound_holds") == "false"]


def format_report(rows: list[dict]) -> str:
    cols = ["instance_id", "problem", "n", "k", "h", "alg_cost", "opt_cost",
            "empirical_ratio", "theoretical_bound", "bound_holds", "audits_failed"]

    def cell(r, c):
        v = r.get(c, "")
        try:
            f = float(v)
            if c in ("n", "k", "h", "audits_failed"):
                return v
            return f"{f:.4f}"
        except ValueError:
            return v

    table = [cols] + [[cell(r, c) for c in cols] for r in rows]
    widths = [max(len(str(row[i])) for row in table) for i in range(len(cols))]
    lines = ["  ".join(str(v).rjust(wd) for v, wd in zip(row, widths)) for row in table]
    bad = summary_violations(rows)
    audits = sum(int(r.get("audits_failed") or 0) for r in rows)
    lines.append(f"{len(rows)} rows, {len(bad)} bound violations, {audits} failed audits")
    return "\n".join(lines)
