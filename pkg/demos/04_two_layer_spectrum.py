"""
Spectrum of the two-layer string
================================

Eigenvalues of -(p f')' = lambda f on [0, 2] with p = 1 then 4, Dirichlet
ends and the calibrated interface condition.  The counting function grows
like sqrt(lambda) L_opt / pi with optical length L_opt = 1 + 1/2, diagonal
matrix elements average to phase-space means, and conjugating a
multiplication operator by the wave group is tracked by the diagonal
transfer operator.
"""
import math
import time

import numpy as np

from raysplit.spectral1d import (SecularProblem, averaging_check, calibrated_model, identity_multiplier,
                                 local_weyl_average, qe_variance, solve_spectrum, tapered_multiplier,
                                 weyl_slope)

model = calibrated_model()
prob = SecularProblem.from_model(model)
t0 = time.perf_counter()
data = solve_spectrum(prob, 2e7)
print(f"{len(data)} eigenvalues in {time.perf_counter() - t0:.2f}s")
print("first few:", np.round(data.lambdas[:5], 6))
print("Weyl slope", weyl_slope(data), "expected", prob.optical_length / math.pi)

layer0 = tapered_multiplier(prob, lambda x: (x < 1).astype(float), "layer0", breaks=(1.0,))
for N in (250, 500, 1000, 2000):
    avg, target = local_weyl_average(data, layer0, N)
    print(f"N = {N:4d}: mean diagonal {avg:.6f}, phase-space mean {target:.6f}")
V = qe_variance(data, layer0, 2000)
print("variance curve at 100, 1000, 2000:", V[99], V[999], V[1999])

one = identity_multiplier()
res = averaging_check(model, data, layer0, one, one, 0.7)
print(f"t = 0.7: quantum {res.quantum:.6f}, classical {res.classical:.6f}, tail bound {res.tail_bound:.1e}")
