import dataclasses
import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import exact_forward, newman_relu_float
from relux.approx import (CATALOG_SPECS, CertificateViolation, PrecisionError, activation_plan, certificate_check,
                          downstream_norms, get_activation, identity_block, inverse_bound, inverse_chain,
                          newman_rational_reference, normalized_derivatives, plan_activation_to_relu,
                          plan_relu_to_activation, preactivation_bounds, probe_grid,
                          relu_activation_approx_net, relu_from_activation_net, relu_polynomial_net,
                          sawtooth_square_net, square_block, taylor_degree, transform_activation_to_relu,
                          transform_relu_to_activation)
from relux.core import BINARY64, eval_batch, eval_network, make_network, network_to_pwl1d

SMALL_GRID = probe_grid(-1, 1, n_grid=801, n_random=100)
ACTS = sorted(CATALOG_SPECS)


class TestCatalog:
    @pytest.mark.parametrize("name", ACTS)
    def test_certificate(self, name):
        rep = certificate_check(name, n_max=12)
        assert rep.ok

    def test_gaussian_hermite_bound(self):
        rep = certificate_check("gaussian", n_max=6)
        assert rep.envelope[5] == pytest.approx(4 / 3)
        assert rep.max_normalized[5] <= 4 / 3 and rep.max_normalized[5] <= 1

    def test_tanh_envelope(self):
        assert get_activation("tanh").envelope(10) == pytest.approx(4 * (12 / (5 * math.pi)) ** 10)

    def test_logistic_first_derivative(self):
        rep = certificate_check("logistic", n_max=1)
        assert rep.max_normalized[0] == pytest.approx(0.25)

    def test_unknown(self):
        with pytest.raises(ValueError):
            get_activation("relu6")

    @pytest.mark.parametrize("name", ACTS)
    def test_derivatives_against_finite_differences(self, name):
        spec = get_activation(name)
        x, h = 0.3, 1e-4
        d = normalized_derivatives(name, x, 2)
        assert float(d[0]) == pytest.approx(float(spec.evaluate(x)))
        fd1 = (spec.evaluate(x + h) - spec.evaluate(x - h)) / (2 * h)
        fd2 = (spec.evaluate(x + h) - 2 * spec.evaluate(x) + spec.evaluate(x - h)) / h ** 2
        assert float(d[1]) == pytest.approx(float(fd1), rel=1e-6, abs=1e-9)
        assert 2 * float(d[2]) == pytest.approx(float(fd2), rel=1e-4, abs=1e-6)

    def test_bad_range(self):
        with pytest.raises(ValueError):
            certificate_check("tanh", n_max=0)

    def test_violation_raised(self):
        spec = dataclasses.replace(get_activation("tanh"), envelope_fn=lambda n: 1e-3)
        with pytest.raises(CertificateViolation):
            certificate_check(spec, n_max=3)
        assert not certificate_check(spec, n_max=3, strict=False).ok


class TestBlocks:
    def test_identity_gaussian(self):
        blk, rep = identity_block("gaussian", (-1, 1), 1e-6)
        assert rep.ok and rep.grid_size >= 10 ** 4
        assert abs(float(blk(0.0))) < 1e-15

    def test_identity_logistic(self):
        _, rep = identity_block("logistic", (-2, 2), 1e-4)
        assert rep.max_abs_error <= 1e-4

    @pytest.mark.parametrize("name", ACTS)
    def test_square_symmetry(self, name):
        blk, _ = square_block(name, 1e-2)
        xs = np.linspace(-1, 1, 201)
        assert float(blk(0.0)) == 0
        np.testing.assert_allclose(blk(xs), blk(-xs), rtol=0, atol=1e-12)

    def test_square_logistic(self):
        blk, rep = square_block("logistic", 1e-3)
        assert rep.max_abs_error <= 5e-3 and rep.ok
        net = blk.network()
        assert net.width == 2 and net.depth == 1
        np.testing.assert_allclose(eval_batch(net, [[0.5]])[0, 0], 0.25, atol=1e-5)

    def test_square_too_small_step(self):
        with pytest.raises(PrecisionError):
            square_block("logistic", 1e-9)

    def test_inverse_chain(self):
        net, bound = inverse_chain(F(1, 2), 3)
        assert bound == F(1, 2 ** 15) == inverse_bound(F(1, 2), 3)
        assert net.width <= 3 and net.activation == "square"
        assert eval_network(net, [1]) == [1]

    def test_inverse_chain_value(self):
        net, bound = inverse_chain(F(1, 2), 6)
        assert abs(eval_network(net, [F(1, 2)])[0] - 2) <= bound


class TestNewman:
    def test_zero(self):
        assert newman_rational_reference(5, 0.0) == 0

    @pytest.mark.parametrize("n", [4, 9, 16])
    def test_bound_and_float_oracle(self, n):
        xs = probe_grid(-1, 1)
        ys = newman_rational_reference(n, xs)
        assert np.max(np.abs(ys - np.maximum(xs, 0))) <= 1.5 * math.exp(-math.sqrt(n))
        np.testing.assert_allclose(ys, newman_relu_float(n, xs), atol=1e-12)

    def test_network_logistic(self):
        net, rep = relu_from_activation_net("logistic", 4, grid=SMALL_GRID)
        assert rep.ok and net.width <= 8
        assert abs(float(eval_batch(net, [[-1.0]])[0, 0])) <= rep.bound

    def test_network_gaussian(self):
        net, rep = relu_from_activation_net("gaussian", 4, grid=SMALL_GRID)
        assert rep.max_abs_error <= 2.5 * math.exp(-2) + 1e-6

    def test_binary64_refused(self):
        with pytest.raises(PrecisionError):
            relu_from_activation_net("logistic", 9, mode=BINARY64)

    def test_rational_refused(self):
        with pytest.raises(PrecisionError):
            relu_from_activation_net("logistic", 2, mode="rational")


class TestSawtooth:
    def test_abs_at_zero_depth(self):
        net, rep = sawtooth_square_net(0)
        assert eval_network(net, [F(1, 2)])[0] - F(1, 4) == F(1, 4)

    @pytest.mark.parametrize("n", range(0, 11))
    def test_bound_and_shape(self, n):
        net, rep = sawtooth_square_net(n)
        assert rep.max_abs_error <= 4.0 ** -n + 1e-12
        assert net.depth == n + 3 and net.width == 3

    def test_clip(self):
        net, _ = sawtooth_square_net(4)
        assert eval_network(net, [2])[0] == 1 and eval_network(net, [-3])[0] == 1

    def test_dyadic_interpolation(self):
        n = 6
        net, _ = sawtooth_square_net(n)
        f = network_to_pwl1d(net)
        for i in range(-2 ** n, 2 ** n + 1):
            x = F(i, 2 ** n)
            assert f(x) == x * x
        inside = [s for x, s in zip((F(-10),) + f.breakpoints, f.slopes) if -1 <= x < 1]
        assert max(abs(s) for s in inside) <= 2


class TestPolynomial:
    def test_constant(self):
        net, rep = relu_polynomial_net([F(3, 7)], 1e-3)
        assert all(v == F(3, 7) for v in (exact_forward(net, [F(i, 10)])[0][0] for i in range(-10, 11)))

    def test_square(self):
        _, rep = relu_polynomial_net([0, 0, 1], 1e-3)
        assert rep.max_abs_error <= 1e-3

    def test_cubic(self):
        net, rep = relu_polynomial_net([0, -1, 0, 1], 1e-2)
        assert rep.max_abs_error <= 1e-2 and net.width <= 8

    @settings(max_examples=15, deadline=None)
    @given(st.lists(st.integers(-5, 5), min_size=1, max_size=6), st.sampled_from([1e-1, 1e-2, 1e-3]))
    def test_random(self, coeffs, eps):
        net, rep = relu_polynomial_net(coeffs, eps)
        assert rep.ok and net.width <= 8


class TestActivationApprox:
    @pytest.mark.parametrize("name", ["softplus", "gaussian"])
    def test_whole_line(self, name):
        net, rep = relu_activation_approx_net(name, 1e-2, interval=(-20, 20))
        assert rep.ok and net.width <= 11

    @pytest.mark.parametrize("name", ACTS)
    def test_far_field(self, name):
        net, _ = relu_activation_approx_net(name, 5e-2, verify=False)
        xs = np.array([-300.0, -60.0, 45.0, 500.0])
        ys = eval_batch(net, xs[:, None])[:, 0].astype(float)
        np.testing.assert_allclose(ys, get_activation(name).evaluate(xs), atol=5e-2)

    def test_plan(self):
        plan = activation_plan("logistic", 1e-2)
        assert plan.windows[0].lo < 0 < plan.windows[-1].hi
        assert plan.windows[-1].hi >= get_activation("logistic").far_field_radius(5e-3)
        assert all(a.hi > b.lo for a, b in zip(plan.windows, plan.windows[1:]))

    def test_bad_eps(self):
        with pytest.raises(ValueError):
            activation_plan("tanh", 0.5)

    def test_taylor_degree_grows(self):
        assert taylor_degree("tanh", 0.0, 1e-2) < taylor_degree("tanh", 0.0, 1e-6)


class TestTransforms:
    def test_preactivation_bounds(self):
        net = make_network([([[2], [-1]], [0, 1]), ([[1, 1]], [0]), ([[3]], [0])])
        b = preactivation_bounds(net)
        assert b[0] == [(-2, 2), (0, 2)]
        assert b[1] == [(0, 4)]
        assert downstream_norms(net) == [6, 3]

    def test_zero_net(self):
        net = make_network([([[0]], [0]), ([[0]], [0])])
        new, rep = transform_relu_to_activation(net, "logistic", 1e-2, points=SMALL_GRID[:, None])
        assert rep.max_abs_error <= 1e-2

    def test_single_neuron(self):
        net = make_network([([[1]], [0]), ([[1]], [0])])
        new, rep = transform_relu_to_activation(net, "logistic", 1e-1, points=SMALL_GRID[:, None])
        assert rep.ok and new.activation == "logistic"

    def test_degree_cap(self):
        net = make_network([([[1]], [0]), ([[1]], [0])])
        with pytest.raises(PrecisionError):
            plan_relu_to_activation(net, 1e-12)

    def test_zero_weight_to_relu(self):
        net = make_network([([[0]], [0]), ([[0]], [F(1, 3)])], activation="tanh", mode=BINARY64)
        new, rep = transform_activation_to_relu(net, 1e-2)
        assert rep.max_abs_error == 0

    def test_softplus_neuron(self):
        net = make_network([([[1]], [0]), ([[1]], [0])], activation="softplus", mode=BINARY64)
        new, rep = transform_activation_to_relu(net, 1e-3)
        assert rep.max_abs_error <= 1e-3 and new.activation == "relu"

    def test_layer_budget(self):
        net = make_network([([[1], [1]], [0, 0]), ([[2, 2]], [0]), ([[1]], [0])], activation="tanh")
        plans = plan_activation_to_relu(net, 1e-2)
        assert sum(e * float(a) for e, a in plans) <= 1e-2 + 1e-15
