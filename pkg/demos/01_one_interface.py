"""
A single interface in one dimension
===================================

Two layers of length 1 with stiffness 1 and 4.  A ray hitting the
interface splits into a reflected and a transmitted piece; with the
calibrated interface weight the classical weights match the quantum
reflection and transmission probabilities of a plane wave.
"""
import numpy as np

from raysplit.flow import BranchTree, PrunePolicy, evolve
from raysplit.geometry import PhasePoint
from raysplit.spectral1d import calibrate_b, calibrated_model, plane_wave_coefficients

model = calibrated_model((1.0, 1.0), (1.0, 4.0))
print("interface weight b =", calibrate_b(1.0, 4.0))

# start in the middle of the soft layer, moving right
start = PhasePoint(0, (0.5,), (1.0,))
tree = evolve(model, BranchTree.start(model, start), 0.6, PrunePolicy(eps_amp=0.0))
for br in tree.alive:
    print(f"code {br.kappa!r:6} amplitude {br.amp.real:+.6f} weight {br.weight:.6f} at x = {br.point.x[0]:.3f}")

# the same numbers from a plane wave, at a few frequencies
for lam in (1.0, 1e2, 1e4):
    R, T, flux = plane_wave_coefficients(1.0, 4.0, calibrate_b(1.0, 4.0), lam)
    print(f"lambda = {lam:8.0f}: R = {R.real:+.6f}, transmitted flux {flux * abs(T) ** 2:.6f}")

# after many bounces the tree is large but the weights still sum to one
tree = evolve(model, BranchTree.start(model, start), 6.0, PrunePolicy(eps_amp=0.0))
print(len(tree.alive), "branches at t = 6, total weight", tree.total_weight())
weights = np.array([b.weight for b in tree.alive])
print("largest five weights", np.sort(weights)[-5:])
