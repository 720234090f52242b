"""
The section map of two glued disks
==================================

Two unit disks glued along their boundaries by a circle map chi.  On the
boundary section (s, u) the chord map of the plus disk is the rotation
s -> s + 2 arccos(u); the minus disk does the same in its own coordinate.
With chi the identity both maps agree and |u| never changes.  With
chi(s) = s + 0.3 sin(s) they do not, and fixed points of mixed words become
isolated.
"""
import numpy as np

from raysplit import disks
from raysplit.geometry import GluedDisks, SineCircleMap

rng = np.random.default_rng(0)
start = disks.SectionPoint(0.4, 0.3)
for eps in (0.0, 0.3):
    model = GluedDisks(SineCircleMap(eps))
    rows = np.array(disks.section_orbit(model, start, 2000, rng))
    u = np.abs(rows[:, 3])
    print(f"eps = {eps}: |u| ranges over [{u.min():.3f}, {u.max():.3f}] in 2000 steps")

model = GluedDisks(SineCircleMap(0.3))
print(disks.genericity_check(model))
for word in ("+3", "-+", "+-2"):
    pts = disks.periodic_point_scan(model, word, resolution=100)
    n_deg = sum(p.degenerate for p in pts)
    print(f"word {word}: {len(pts)} fixed points, {n_deg} on curves of fixed points")

# area preservation of both maps on a grid
s, u = np.meshgrid(np.linspace(0, 6, 40), np.linspace(-0.9, 0.9, 40))
jp = disks.area_jacobian(model, disks.p_plus_arrays, s.ravel(), u.ravel())
um = 0.9 * u.ravel() * disks.psi(model, s.ravel())
jm = disks.area_jacobian(model, disks.p_minus_arrays, s.ravel(), um)
print("max |det - 1|:", np.abs(jp - 1).max(), np.abs(jm - 1).max())
