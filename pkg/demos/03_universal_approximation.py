"""
Universal approximation with narrow networks
============================================

Three smooth targets on the unit square, interpolated on refining Kuhn grids and
compiled into width-10 relu networks.  The W^{1,1} error roughly halves each time
the grid is refined.
"""
import math

from relux.separation import bump2d, bump2d_grad, sobolev_rate_experiment


def sine(p):
    if any(c in (0, 1) for c in p):
        return 0  # sin(pi) is not exactly 0 in floating point
    return math.sin(math.pi * p[0]) * math.sin(math.pi * p[1])


def sine_grad(p):
    x, y = (math.pi * float(c) for c in p)
    return (math.pi * math.cos(x) * math.sin(y), math.pi * math.sin(x) * math.cos(y))


def tent(p):
    x, y = p
    return 16 * x * (1 - x) * y * (1 - y)


def tent_grad(p):
    x, y = (float(c) for c in p)
    return (16 * (1 - 2 * x) * y * (1 - y), 16 * x * (1 - x) * (1 - 2 * y))


targets = [("bump", bump2d, bump2d_grad), ("sine", sine, sine_grad), ("quartic", tent, tent_grad)]
for name, f, grad in targets:
    rep = sobolev_rate_experiment(f, (2, 4, 8, 16), grad=grad, name=name)
    errs = ", ".join(f"{e:.4f}" for e in rep.errors)
    print(f"{name:8s} W11 errors {errs}; order {rep.order:.2f}; depths {rep.depths}; width {rep.widths[-1]}")
