"""
Branches meeting again on two hemispheres
=========================================

Two round hemispheres of radii c+ and c- glued along the equator.  Every
flight from the equator back to it takes pi times the radius and lands at
the antipode, so branches that made the same flights in another order
meet again.  When c+ and c- are commensurate, branches with *different*
numbers of flights on each side can meet as well.
"""
import math

from raysplit.transfer import recombination_census
from raysplit.geometry import Hemispheres

t = 4 * math.pi + 0.1
for c_minus in (0.5, math.sqrt(2)):
    out = recombination_census(Hemispheres(1.0, c_minus), t, 300, seed=0)
    print(f"c- = {c_minus:.4f}: {out['starts_with_recombination']}/300 starts recombine; "
          f"{out['exchange_groups']} exchange groups, {out['reordering_groups']} reordering groups; "
          f"diagonal weight drift {out['max_abs_wd_deviation']:.2e}")

# with equal radii the sphere is smooth and nothing reflects
smooth = recombination_census(Hemispheres(1.0, 1.0), t, 100, seed=0)
print("equal radii:", smooth["recombining_groups"], "recombining groups")
