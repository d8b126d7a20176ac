"""
Counting linear regions
=======================

One-input relu networks, their exact region counts and the general upper bound.
"""
from fractions import Fraction as F

from relux.bounds import optimal_design, r_exact_1d, upper_bound_general
from relux.compile1d import build_max_region_network
from relux.core import make_network, network_to_pwl1d, pwl1d_region_report

# A three-neuron network: h(x) = 1 - relu(1 - 3x) - relu(3x - 1) + relu(6x - 4)
h = make_network([([[-3], [3], [6]], [1, -1, -4]), ([[-1, -1, 1]], [1])])
f = network_to_pwl1d(h)
print("h breakpoints:", [str(x) for x in f.breakpoints])
print("h slopes:     ", [str(s) for s in f.slopes])
print(pwl1d_region_report(f))

# The maximum over all weights has a closed form in one dimension, and a construction reaches it
for design in [(1, 2, 1), (1, 3, 3, 1), (1, 4, 4, 4, 1), (1, 3, 3, 2, 1)]:
    R = r_exact_1d(design)[0]
    got = len(network_to_pwl1d(build_max_region_network(design)).slopes)
    print(f"{design}: formula {R}, constructed {got}, upper bound {upper_bound_general(design).value}")

# Putting width-2 layers last never hurts; the best use of a neuron budget
for budget in (6, 8, 12):
    design, R = optimal_design(budget)
    print(f"budget {budget}: best design {design} with {R} regions")

# In two dimensions the upper bound is compared with an exact cell count
from relux.core import cell_decomposition_2d
net2 = make_network([([[1, 0], [0, 1], [1, 1]], [0, 0, F(-1, 2)]), ([[1, -1, 2]], [0])])
print("2-D net: regions", cell_decomposition_2d(net2).regions, "bound", upper_bound_general((2, 3, 1)).value)
