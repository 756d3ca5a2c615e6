"""Weighted paging on the cyclic k+1 page sequence.

With h = k the optimum faults once every k requests, while the fractional
algorithm pays a constant times log k per phase.  The printed ratio
stays below 2 ln(2k + 1).  Run with ``python demos/paging_cyclic.py``.
"""
import math

from bregman_online import generators as gen
from bregman_online.offline import opt_paging
from bregman_online.paging import paging_run

for k in range(1, 7):
    n = k + 1
    weights = [1.0] * n
    initial = list(range(k))
    requests = gen.generate_requests(
        "cyclic_k_plus_1", {"n": n, "k": k, "length": 60 * (k + 1), "leaves": [k, *initial]})
    trace = paging_run(weights, k, k, initial, requests)
    opt = opt_paging(weights, k, requests, initial)
    ratio = trace.total_movement / opt.cost
    print(f"k={k}: ALG {trace.total_movement:8.3f}  OPT {opt.cost:6.1f}  "
          f"ratio {ratio:5.3f}  2 ln(2k+1) = {2 * math.log(2 * k + 1):5.3f}")
