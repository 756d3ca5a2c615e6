"""Command line interface.

Verbs: ``gen-tree``, ``gen-requests``, ``run``, ``opt``, ``audit``, ``report``.
Exit codes: 0 success, 2 invalid input, 3 solver non-convergence,
4 audit failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import generators as gen
from . import harness, offline
from .bregman import ConvergenceError, ProjectionError
from .instances import InstanceError, load_instance
from .paging import PagingError
from .setcover import SetCoverError
from .tree import TreeError, build_tree

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_SOLVER = 3
EXIT_AUDIT = 4

INPUT_ERRORS = (InstanceError, harness.ConfigError, gen.GeneratorError, TreeError, PagingError,
                SetCoverError, offline.OracleLimitError, FileNotFoundError, IsADirectoryError,
                KeyError, ValueError)


def _write(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_gen_tree(args) -> int:
    tree = gen.generate_hst(args.branching, args.depth, args.ratio, args.root_weight, args.seed,
                            args.jitter)
    meta = gen.hst_metadata(args.branching, args.depth, args.ratio, args.root_weight, args.seed,
                            args.jitter)
    _write(json.dumps(gen.describe(tree, meta), sort_keys=True) + "\n", args.out)
    return EXIT_OK


def cmd_gen_requests(args) -> int:
    params = {"length": args.length}
    tree = None
    if args.tree:
        tree = build_tree(json.loads(Path(args.tree).read_text()))
        params["n"] = tree.n
    if args.n is not None:
        params["n"] = args.n
    if args.k is not None:
        params["k"] = args.k
    if args.h is not None:
        params["h"] = args.h
    if args.weights:
        params["weights"] = [float(v) for v in args.weights.split(",")]
        params.setdefault("n", len(params["weights"]))
    if args.initial:
        params["initial"] = [int(v) for v in args.initial.split(",")]
    if args.leaves:
        params["leaves"] = [int(v) for v in args.leaves.split(",")]
    if args.model == "adversarial_greedy":
        if tree is not None:
            params["tree"] = tree
        params.setdefault("h", params.get("k"))
    if "n" not in params and args.model != "adversarial_greedy":
        raise InstanceError("--n or --tree is required")
    seq = gen.generate_requests(args.model, params, args.seed)
    doc = {"model": args.model, "seed": args.seed, "rng": gen.RNG_NAME, "requests": seq}
    if tree is not None:
        ids = tree.leaf_ids()
        doc["request_ids"] = [ids[r] for r in seq]
    _write(json.dumps(doc, sort_keys=True) + "\n", args.out)
    return EXIT_OK


def cmd_run(args) -> int:
    cfg_path = Path(args.config)
    cfg = harness.ExperimentConfig.load(cfg_path)
    if args.audit:
        cfg.audit = args.audit
    if args.workers:
        cfg.workers = args.workers
    res = harness.run_experiment(cfg, base=cfg_path.parent,
                                 out_dir=Path(args.out_dir) if args.out_dir else None)
    print(f"wrote {res.paths['trace']}, {res.paths['summary']}, {res.paths['plot']}")
    print(f"{len(res.outcomes)} instances, {res.bound_violations} bound violations, "
          f"{res.audit_failures} failed audits")
    return EXIT_AUDIT if (res.audit_failures or res.bound_violations) else EXIT_OK


def cmd_opt(args) -> int:
    inst = load_instance(args.instance)
    if inst.problem == "kserver":
        sol = offline.opt_kserver(inst.tree, inst.h, inst.requests, inst.initial, method=args.method)
        doc = sol.to_dict()
        ids = inst.tree.leaf_ids()
        doc["config_ids"] = [[ids[i] for i in c] for c in sol.configs]
    elif inst.problem == "paging":
        doc = offline.opt_paging(inst.weights, inst.h, inst.requests, inst.initial).to_dict()
    else:
        sol = offline.opt_setcover(inst.rows, inst.n)
        doc = sol.to_dict()
        doc["trajectory"] = [[int(i) for i, v in enumerate(b) if v]
                             for b in offline.monotone_comparator(inst.rows, sol.configs[0], inst.n)]
    _write(json.dumps(doc, sort_keys=True) + "\n", args.out)
    return EXIT_OK


def cmd_audit(args) -> int:
    inst = load_instance(args.instance)
    out = harness.run_instance(inst, Path(args.instance).stem, audit=args.level,
                               samples=args.samples, seed=args.seed)
    failed = [dict(c, step=line.get("step", line.get("t"))) for line in out.trace
              for c in line.get("checks", []) if c.get("pass") is False]
    report = {"instance": str(args.instance), "level": args.level, "summary": out.summary,
              "failed_checks": failed}
    _write(json.dumps(report, sort_keys=True, indent=2) + "\n", args.out)
    return EXIT_AUDIT if (out.audit_failures or out.summary.get("bound_holds") is False) else EXIT_OK


def cmd_report(args) -> int:
    rows = []
    for p in args.summary:
        rows += harness.read_summary(p)
    print(harness.format_report(rows))
    bad = harness.summary_violations(rows)
    audits = sum(int(r.get("audits_failed") or 0) for r in rows)
    return EXIT_AUDIT if (bad or audits) else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bregman-online",
                                description="Online k-server, paging and set cover by Bregman projection.")
    sub = p.add_subparsers(dest="verb", required=True)

    g = sub.add_parser("gen-tree", help="write a complete HST as tree JSON")
    g.add_argument("--branching", type=int, required=True)
    g.add_argument("--depth", type=int, required=True)
    g.add_argument("--ratio", type=float, default=0.5)
    g.add_argument("--root-weight", type=float, default=1.0)
    g.add_argument("--jitter", type=float, default=0.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen_tree)

    g = sub.add_parser("gen-requests", help="write a request sequence")
    g.add_argument("--model", required=True, choices=gen.REQUEST_MODELS)
    g.add_argument("--length", type=int, required=True)
    g.add_argument("--tree", help="tree JSON (k-server leaves)")
    g.add_argument("--n", type=int)
    g.add_argument("--k", type=int)
    g.add_argument("--h", type=int)
    g.add_argument("--weights", help="comma-separated paging weights")
    g.add_argument("--initial", help="comma-separated initial leaf numbers")
    g.add_argument("--leaves", help="comma-separated leaves for cyclic_k_plus_1")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen_requests)

    g = sub.add_parser("run", help="run an experiment config")
    g.add_argument("--config", required=True)
    g.add_argument("--out-dir")
    g.add_argument("--audit", choices=harness.AUDIT_LEVELS)
    g.add_argument("--workers", type=int)
    g.set_defaults(func=cmd_run)

    g = sub.add_parser("opt", help="offline optimum of an instance")
    g.add_argument("--instance", required=True)
    g.add_argument("--method", default="auto", choices=("auto", "dp", "flow"))
    g.add_argument("--out")
    g.set_defaults(func=cmd_opt)

    g = sub.add_parser("audit", help="run one instance with audits")
    g.add_argument("--instance", required=True)
    g.add_argument("--level", default="full", choices=harness.AUDIT_LEVELS)
    g.add_argument("--samples", type=int, default=20)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g.set_defaults(func=cmd_audit)

    g = sub.add_parser("report", help="tabulate summary CSVs and check bounds")
    g.add_argument("summary", nargs="+")
    g.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConvergenceError as e:
        print(f"error: solver did not converge: {e}", file=sys.stderr)
        return EXIT_SOLVER
    except ProjectionError as e:
        print(f"error: projection failed: {e}", file=sys.stderr)
        return EXIT_SOLVER
    except INPUT_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
