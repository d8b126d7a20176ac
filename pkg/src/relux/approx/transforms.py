"""Replacing the activation of a whole network: ReLU <-> catalog activations."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..core.builder import NetBuilder
from ..core.network import Network, eval_batch
from ..core.scalars import BINARY64, MPFR, mp_context, to_fraction
from .blocks import build_newman_block, chain_length, newman_precision
from .catalog import ApproxReport, PrecisionError, get_activation, probe_grid
from .lanes import parallel, run
from .relu_nets import activation_lane, activation_plan

MAX_NEWMAN_DEGREE = 64
MAX_BITS = 4096
ACT_EPS_CAP = 0.25


def _q(v):
    return to_fraction(v) if not isinstance(v, float) else Fraction(v)


def preactivation_bounds(net: Network, lo=-1, hi=1):
    """Interval bounds [(lo_i, hi_i)] of each hidden layer's pre-activations over the box
    [lo, hi]^n_0, for a ReLU network (exact rational interval arithmetic)."""
    box = [(Fraction(lo), Fraction(hi))] * net.n_in
    out = []
    for layer in net.layers[:-1]:
        cur = []
        for r, bias in zip(layer.weights, layer.bias):
            a = c = _q(bias)
            for w, (l, h) in zip(r, box):
                w = _q(w)
                a += min(w * l, w * h)
                c += max(w * l, w * h)
            cur.append((a, c))
        out.append(cur)
        box = [(max(a, Fraction(0)), max(c, Fraction(0))) for a, c in cur]
    return out


def downstream_norms(net: Network):
    """A_k = product of the infinity norms of the affine maps after hidden layer k (k = 1..L)."""
    norms = [max((sum(abs(_q(v)) for v in r) for r in l.weights), default=Fraction(0)) for l in net.layers]
    out = []
    for k in range(1, len(net.layers)):
        a = Fraction(1)
        for v in norms[k:]:
            a *= v
        out.append(a)
    return out


def box_points(n0: int, lo=-1.0, hi=1.0, n_grid=10 ** 4, n_random=10 ** 3, seed=0):
    if n0 == 1:
        return probe_grid(lo, hi, n_grid, n_random, seed)[:, None]
    per = max(2, math.ceil(n_grid ** (1 / n0)))
    axes = np.meshgrid(*[np.linspace(lo, hi, per)] * n0, indexing="ij")
    grid = np.stack([a.ravel() for a in axes], axis=1)
    rng = np.random.default_rng(seed)
    return np.concatenate([grid, rng.uniform(lo, hi, (n_random, n0))])


def _measure(new, ref, pts):
    a = eval_batch(new, pts).astype(float)
    b = eval_batch(ref, pts).astype(float)
    return float(np.max(np.abs(a - b)))


# --- ReLU -> smooth activation -------------------------------------------------------

@dataclass(frozen=True)
class NewmanLayerPlan:
    degree: int          # Newman degree n_k
    scales: tuple        # per-neuron input scale s (block input z / s lies in [-1/2, 1/2])
    weight: Fraction     # A_k
    budget: float        # A_k * max s * block error


def newman_block_error(n: int) -> float:
    """Bound on |block - max(0, x)| on [-1, 1]: the rational error plus block slack."""
    return 1.5 * math.exp(-math.sqrt(n)) + 1e-6


def plan_relu_to_activation(net: Network, eps):
    if net.activation != "relu":
        raise ValueError("expects a ReLU network")
    L = net.depth
    bounds = preactivation_bounds(net)
    weights = downstream_norms(net)
    plans = []
    for k in range(L):
        scales = tuple(2 * max(abs(a), abs(c)) or Fraction(1) for a, c in bounds[k])
        s = float(max(scales))
        share = float(eps) / (L * s * float(weights[k])) if weights[k] else 1.0
        x = (share - 1e-6) / 1.5
        if x <= 0:
            raise PrecisionError(f"layer {k + 1}: eps is below the block slack")
        n = max(1, math.ceil(math.log(x) ** 2)) if x < 1 else 1
        if n > MAX_NEWMAN_DEGREE:
            raise PrecisionError(f"layer {k + 1} needs Newman degree {n} > {MAX_NEWMAN_DEGREE}")
        plans.append(NewmanLayerPlan(n, scales, weights[k], float(weights[k]) * s * newman_block_error(n)))
    return plans


def transform_relu_to_activation(net: Network, act, eps, verify: bool = True, points=None):
    """Network with activation ``act`` within eps of the ReLU network on [-1, 1]^n_0.

    Each ReLU neuron becomes s * R(z / s), R the rational ReLU block, with the
    Newman degree of each layer chosen from the downstream weight norms.
    """
    spec = get_activation(act) if isinstance(act, str) else act
    plans = plan_relu_to_activation(net, eps)
    bits = max((newman_precision(p.degree)[0] for p in plans), default=53)
    if bits > MAX_BITS:
        raise PrecisionError(f"needs {bits} bits (cap {MAX_BITS})")
    with mp_context(bits):
        b = NetBuilder(net.n_in, activation=spec.name, mode=MPFR, precision=bits)
        z = b.inputs()
        for layer, p in zip(net.layers[:-1], plans):
            pres = [_affine(r, bias, z) for r, bias in zip(layer.weights, layer.bias)]
            lanes = [build_newman_block(b, spec, pre / s, p.degree) for pre, s in zip(pres, p.scales)]
            outs = run(b, parallel(*lanes))
            z = [o * s for o, s in zip(outs, p.scales)]
        last = net.layers[-1]
        new = b.finish([_affine(r, bias, z) for r, bias in zip(last.weights, last.bias)])
    rep = None
    if verify:
        pts = box_points(net.n_in) if points is None else np.asarray(points, float)
        err = _measure(new, net.with_mode(BINARY64), pts)
        rep = ApproxReport(f"relu net -> {spec.name}", (-1.0, 1.0), len(pts), err, float(eps), new.depth, new.width)
    return new, rep


def _affine(row, bias, z):
    acc = _q(bias) + 0 * z[0]
    for w, v in zip(row, z):
        if w != 0:
            acc = acc + _q(w) * v
    return acc


# --- smooth activation -> ReLU ---------------------------------------------------------

@dataclass(frozen=True)
class ActivationLayerPlan:
    eps: float           # per-neuron accuracy eps_k
    weight: Fraction     # A_k
    depth: int

    @property
    def budget(self) -> float:
        return float(self.weight) * self.eps


def plan_activation_to_relu(net: Network, eps):
    """eps_k = eps / (L A_k); catalog activations are 1-Lipschitz, so errors add up to eps."""
    get_activation(net.activation)
    L = net.depth
    out = []
    for a in downstream_norms(net):
        e = min(float(eps) / (L * float(a)), ACT_EPS_CAP) if a else ACT_EPS_CAP
        out.append((e, a))
    return out


def transform_activation_to_relu(net: Network, eps, verify: bool = True, points=None):
    """ReLU network (width <= 11 N) within eps of a catalog-activation network on [-1, 1]^n_0."""
    spec = get_activation(net.activation)
    plans = []
    for e, a in plan_activation_to_relu(net, eps):
        ap = activation_plan(spec, e)
        plans.append((ap, ActivationLayerPlan(e, a, ap.depth)))
    b = NetBuilder(net.n_in, mode=BINARY64)
    z = b.inputs()
    for layer, (ap, _) in zip(net.layers[:-1], plans):
        pres = [_affine(r, bias, z) for r, bias in zip(layer.weights, layer.bias)]
        z = list(run(b, parallel(*[activation_lane(b, ap, pre) for pre in pres])))
    last = net.layers[-1]
    new = b.finish([_affine(r, bias, z) for r, bias in zip(last.weights, last.bias)])
    rep = None
    if verify:
        pts = box_points(net.n_in) if points is None else np.asarray(points, float)
        err = _measure(new, net.with_mode(BINARY64) if net.mode != BINARY64 else net, pts)
        rep = ApproxReport(f"{spec.name} net -> relu", (-1.0, 1.0), len(pts), err, float(eps), new.depth, new.width)
    return new, rep


def transform_budget(plans) -> float:
    """Sum over layers of (downstream weight) x (block error): the composed error bound."""
    return sum(p.budget for p in plans)
