"""Low-degree advantage bound and the estimation-to-testing reduction.

The bound is below 1 at a small multiple of M / D^6 and grows without
limit past it.  The reduction separates null from alternative once an
estimator points along the hidden direction.

Run: python3 demos/lowdeg_reduction.py
"""

import numpy as np

from robreg import lowdeg
from robreg.core import random_unit_vector
from robreg.experiments import advantage_scale
from robreg.reduction import reduction_instance, run_reduction

d, eps, kappa, D = 1e6, 0.1, 1e3, 8
M = advantage_scale(d, eps, kappa)
print(f"advantage bound, d={d:.0e} eps={eps} kappa={kappa:.0e} D={D}, scale M={M:.3g}")
for f in (1e-2, 1.0, 1e2, 1e4, 1e6, 1e8):
    lb = lowdeg.log_advantage_bound(f * M / D ** 6, d, eps, kappa, D)
    print(f"  n = {f:7.0e} * M / D^6   log bound {lb:10.3f}")

for point in (dict(d=100, kappa=9.0, eps=0.1, n=5000), dict(d=16, kappa=8.0, eps=0.2, n=2000)):
    inst = reduction_instance(point["d"], point["kappa"], point["eps"], 1.0,
                              random_unit_vector(point["d"], 0))
    alt = [run_reduction(inst, point["n"], which="alt", seed=t) for t in range(10)]
    null = [run_reduction(inst, point["n"], which="null", seed=100 + t) for t in range(10)]
    print(f"\nreduction ({alt[0].regime}) d={point['d']} kappa={point['kappa']} eps={point['eps']}")
    print(f"  threshold {alt[0].threshold:.1f}")
    print(f"  alt  statistic median {np.median([v.statistic for v in alt]):10.1f}, "
          f"decided alt {sum(v.decide_alternative for v in alt)}/10")
    print(f"  null statistic median {np.median([v.statistic for v in null]):10.1f}, "
          f"decided null {sum(not v.decide_alternative for v in null)}/10")
