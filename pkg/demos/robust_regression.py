"""Robust fit against OLS under a targeted label attack, plus the certificate.

Run: python3 demos/robust_regression.py
"""

import math

import numpy as np

from robreg.certificate import certify
from robreg.core import stream
from robreg.experiments import regression_model, regression_trial
from robreg.sampling import sample_clean

D, N, TRIALS, SEED = 20, 20000, 5, 7

print("Mahalanobis error, mean over trials (d=20, n=20000)")
print(f"{'eps':>5} {'kappa':>6} {'ols':>8} {'robust':>8} {'sqrt(eps*kappa)':>16}")
for eps in (0.02, 0.05, 0.1):
    for kappa in (1.0, 10.0):
        errs = [regression_trial(D, N, kappa, eps, t, SEED) for t in range(TRIALS)]
        ols = np.mean([e["ols"] for e in errs])
        rob = np.mean([e["robust"] for e in errs])
        print(f"{eps:5.2f} {kappa:6.0f} {ols:8.3f} {rob:8.3f} {math.sqrt(eps * kappa):16.3f}")

# clean data passes the truncated fourth-moment certificate in random directions
rng = stream(SEED, "demo-cert")
model = regression_model(10, 10.0, rng)
data = sample_clean(model, 20000, rng)
reps = certify(data, model, 0.05, trials=5, seed=rng)
print("\ncertificate on clean data (d=10, n=20000, eps=0.05)")
for r in reps:
    print(f"  spectral {r.spectral_value:8.3f}  bound {r.bound_value:8.3f}  passed {r.passed}")
