"""
Compiling piecewise-affine functions into networks
==================================================

Any continuous piecewise-affine function of one variable is computed exactly by a
width-3 network; wider layers trade width for depth.  In two dimensions, functions
on a triangulation compile into width-10 networks.
"""
from fractions import Fraction as F

from relux.compile1d import compile_width3, compile_widthW, verify_compiled
from relux.compilend import compile_simplicial, kuhn_grid_interpolant
from relux.core import Pwl1D, eval_network

f = Pwl1D.from_knots([0, 1, 2, 3, 4, 5, 6], [0, 2, -1, 3, 3, 0, 1], -1, F(1, 2))
print("target: pieces", len(f.slopes), "slopes", [str(s) for s in f.slopes])
for W in (3, 5, 6, 8):
    net = compile_width3(f) if W == 3 else compile_widthW(f, W)
    print(f"width {W}: depth {net.depth}, exact {verify_compiled(f, net)}")

# A pyramid on the unit square, interpolated on a 4 x 4 Kuhn grid
cx = kuhn_grid_interpolant(lambda v: min(v[0], 1 - v[0], v[1], 1 - v[1]), 2, 4)
net = compile_simplicial(cx)
print(f"pyramid: {len(cx.simplices)} triangles -> width {net.width}, depth {net.depth}")
for p in [(F(1, 2), F(1, 2)), (F(1, 3), F(1, 5)), (F(7, 8), F(1, 2))]:
    print(" ", tuple(map(str, p)), "network", eval_network(net, p)[0], "interpolant", cx(p))
