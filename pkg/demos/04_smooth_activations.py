"""
Trading relu for smooth activations
===================================

Relu networks approximate x^2 with a sawtooth construction, and smooth activations
approximate relu through a rational function.  Whole networks convert both ways.
"""
import math
from fractions import Fraction as F

import numpy as np

from relux.approx import (newman_rational_reference, probe_grid, relu_from_activation_net, sawtooth_square_net,
                          transform_activation_to_relu)
from relux.core import BINARY64, make_network

for n in (2, 4, 8):
    net, rep = sawtooth_square_net(n)
    print(f"sawtooth square n = {n}: error {rep.max_abs_error:.2e} <= 4^-n = {4.0 ** -n:.2e}, depth {net.depth}")

xs = probe_grid(-1, 1)
for n in (4, 9, 16):
    err = np.max(np.abs(newman_rational_reference(n, xs) - np.maximum(xs, 0)))
    print(f"rational relu n = {n}: error {err:.2e}, bound {1.5 * math.exp(-math.sqrt(n)):.2e}")

net, rep = relu_from_activation_net("logistic", 4)
print(f"logistic net for relu, n = 4: width {net.width}, depth {net.depth}, error {rep.max_abs_error:.2e}")

tanh_net = make_network([([[1], [F(-1, 2)]], [0, F(1, 4)]), ([[1, 1]], [0])], activation="tanh", mode=BINARY64)
relu_net, rep = transform_activation_to_relu(tanh_net, 1e-2)
print(f"tanh net -> relu net: width {relu_net.width}, depth {relu_net.depth}, error {rep.max_abs_error:.2e}")
