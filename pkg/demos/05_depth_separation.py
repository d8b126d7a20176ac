"""
Depth beats width
=================

A width-3 network with two hidden layers per level makes 3^(L^2) regions on [0, 1];
networks with few regions stay a fixed L1 distance away.  Width 2 cannot build
arbitrary shapes at all.
"""
import random
from fractions import Fraction as F

from relux.core import Pwl1D, make_network, network_to_pwl1d
from relux.separation import (gadget_pwl, grid_oracle, random_candidate, regions_in_unit_interval,
                              separation_certificate)

g = gadget_pwl(2)
print("gadget regions on [0, 1]:", regions_in_unit_interval(g))

cert = separation_certificate(Pwl1D.affine(0, F(1, 2)), 2, regions=4)
print(f"constant 1/2: distance {cert.measured_l1}, certified lower bound {cert.lower_bound}")

rng = random.Random(0)
worst = min(separation_certificate(random_candidate(rng, max_regions=4), 2).measured_l1 for _ in range(50))
print("closest of 50 random 4-region candidates:", worst, float(worst))

best, dist, count = grid_oracle(2)
print(f"best of {count} gridded 4-region candidates: {dist}")

# With one hidden layer of width 2 the result is monotone or bounded on one side.
# Two hidden layers already escape that.
net = make_network([([[3], [-1]], [2, -2]), ([[-1, F(1, 4)], [F(2, 3), F(1, 2)]], [F(-1, 3), 2]),
                    ([[5, -2]], [F(1, 2)])])
f = network_to_pwl1d(net)
print("width-2 depth-2 slopes:", [str(s) for s in f.slopes],
      "monotone", f.is_monotone(), "bounded above", f.bounded_above(), "bounded below", f.bounded_below())
