"""Fractional k-server on a small HST against the offline optimum.

Builds a binary HST of depth 3, feeds it adversarial requests, and prints
the algorithm's movement next to the optimum and the aggregate bound.
Run with ``python demos/kserver_hst.py``.
"""
import numpy as np

from bregman_online import generators as gen
from bregman_online.kserver import aggregate_bound, audit_run, run
from bregman_online.offline import kserver_comparator, opt_kserver

tree = gen.generate_hst(branching=2, depth=3, ratio=0.5)
k, h = 3, 2
initial = [0, 3, 6]
requests = gen.generate_requests(
    "adversarial_greedy", {"tree": tree, "k": k, "h": h, "initial": initial, "length": 40})

trace = run(tree, k, h, initial, requests)
opt = opt_kserver(tree, h, requests, initial)
terms = aggregate_bound(trace, kserver_comparator(opt, tree, h))

print(f"tree: n={tree.n} leaves, depth D={tree.D}, delta={trace.delta:.4f}")
print(f"requests: {requests[:12]} ...")
print(f"fractional movement     {trace.total_movement:10.4f}")
print(f"positive movement       {terms['alg_positive']:10.4f}")
print(f"offline optimum (h={h})   {opt.cost:10.4f}  [{opt.method}]")
print(f"aggregate bound (RHS)   {terms['bound']:10.4f}")
print(f"ratio constant          {terms['ratio_constant']:10.4f}")

reports = audit_run(trace, kserver_comparator(opt, tree, h))
failed = sum(not r.passed for r in reports)
print(f"per-step audits: {len(reports)} steps, {failed} with a failed check")
server_moves = np.array([r.server_movement for r in trace.records])
print(f"server movement d(z, z') total {server_moves.sum():.4f}, largest step {server_moves.max():.4f}")
