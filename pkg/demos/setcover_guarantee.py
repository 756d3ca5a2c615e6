"""Online fractional set cover compared with the exact minimum cover.

Each row arrives online and the multiplicative update restores coverage.
The fractional cost stays below ln(n) OPT + 1.
Run with ``python demos/setcover_guarantee.py``.
"""
import math

from bregman_online import generators as gen
from bregman_online.offline import opt_setcover
from bregman_online.setcover import sc_run

for n, m in [(4, 10), (8, 30), (12, 60), (16, 120)]:
    rows = gen.generate_setcover(n, m, density=0.2, seed=n)
    trace = sc_run(rows, n)
    opt = opt_setcover(rows, n)
    bound = math.log(n) * opt.cost + 1
    print(f"n={n:2d} rows={m:3d}: ALG {trace.cost:7.3f}  OPT {opt.cost:3.0f}  "
          f"ln(n) OPT + 1 = {bound:7.3f}")
