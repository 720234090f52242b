"""
How fast do Cesaro averages settle?
===================================

Squared angular momentum is conserved inside each disk, so it only
changes at the glued boundary.  For the identity gluing it never changes;
for chi(s) = s + 0.3 sin(s) it drifts, but slowly.  Over the horizons
20, 80, 320 the median deviation from the phase-space mean 1/4 barely
moves; it starts to fall only over much longer times.
"""
import numpy as np

from raysplit.geometry import GluedDisks, SineCircleMap
from raysplit.transfer import LiouvilleSampler, angular_momentum_sq, ergodicity_scan, median_stderr

for eps in (0.0, 0.3):
    model = GluedDisks(SineCircleMap(eps))
    rows = ergodicity_scan(model, angular_momentum_sq(model), (20, 80, 320, 1280), 200,
                           LiouvilleSampler(model, 1))
    print(f"eps = {eps}")
    for r in rows:
        print(f"  T = {r.T:6.0f}: median deviation {r.q50:.4f} +- {median_stderr(r.deviations):.4f}, "
              f"plain-average median {np.median(r.plain_deviations):.4f}")
