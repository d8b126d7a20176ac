"""Blocks for networks with a smooth activation: identity, square, product,
inverse, and the rational ReLU approximation assembled from them."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import gmpy2
import mpmath
import numpy as np

from ..core.builder import NetBuilder
from ..core.network import Network, eval_batch
from ..core.scalars import BINARY64, MPFR, RATIONAL, mp_context
from .catalog import ApproxReport, PrecisionError, get_activation, probe_grid
from .lanes import flat, run, split

EPS64 = 2.0 ** -53


# --- single blocks in binary64 ---------------------------------------------------

@dataclass(frozen=True)
class IdentityBlock:
    """x -> (rho(a + h x) - rho(a)) / (h rho'(a)), one enhanced neuron."""
    act: str
    a: float
    h: float

    def __call__(self, x):
        spec = get_activation(self.act)
        d1 = float(_float_derivs(spec, self.a)[0])
        return (spec.evaluate(self.a + self.h * np.asarray(x, float)) - spec.evaluate(self.a)) / (self.h * d1)


@dataclass(frozen=True)
class SquareBlock:
    """x -> (rho(alpha + h x) - 2 rho(alpha) + rho(alpha - h x)) / (h^2 rho''(alpha))."""
    act: str
    alpha: float
    h: float

    def __call__(self, x):
        spec = get_activation(self.act)
        x = np.asarray(x, float)
        d2 = float(_float_derivs(spec, self.alpha)[1])
        num = spec.evaluate(self.alpha + self.h * x) - 2 * spec.evaluate(self.alpha) + spec.evaluate(self.alpha - self.h * x)
        return num / (self.h * self.h * d2)

    def network(self) -> Network:
        spec = get_activation(self.act)
        d2 = float(_float_derivs(spec, self.alpha)[1])
        c = 1 / (self.h * self.h * d2)
        r0 = float(spec.evaluate(self.alpha))
        return Network(_layers([[self.h], [-self.h]], [self.alpha, self.alpha], [[c, c]], [-2 * r0 * c]),
                       self.act, BINARY64)


def _layers(w1, b1, w2, b2):
    from ..core.network import AffineLayer
    return [AffineLayer(w1, b1), AffineLayer(w2, b2)]


def _float_derivs(spec, x):
    with mp_context(120):
        d1, d2 = spec.mp_derivatives(gmpy2.mpfr(x))
        return float(d1), float(d2)


def identity_block(act, interval=(-1, 1), eps=1e-6, grid=None):
    """One enhanced neuron approximating the identity on ``interval`` within eps."""
    spec = get_activation(act) if isinstance(act, str) else act
    if eps <= 0:
        raise ValueError("eps must be positive")
    a = float(spec.deriv_point)
    xs = probe_grid(*interval) if grid is None else np.asarray(grid, float)
    h = 1.0
    while True:
        blk = IdentityBlock(spec.name, a, h)
        err = float(np.max(np.abs(blk(xs) - xs)))
        if err <= eps:
            break
        h /= 2
        if h < 1e-7:
            raise PrecisionError(f"identity within {eps} needs h below 1e-7; cancellation dominates in binary64")
    rep = ApproxReport(f"identity via {spec.name}", tuple(interval), len(xs), err, eps, 1, 1)
    return blk, rep


def square_block(act, h, grid=None):
    """Two enhanced neurons approximating x^2; report on [-1, 1]."""
    spec = get_activation(act) if isinstance(act, str) else act
    if h <= 0:
        raise ValueError("h must be positive")
    d2 = _float_derivs(spec, spec.alpha)[1]
    # cancellation: the numerator loses about rho(alpha) * 2^-53 * 4 absolutely
    rounding = 4 * EPS64 * max(1.0, abs(float(spec.evaluate(spec.alpha)))) / (h * h * abs(d2))
    if rounding > 1e-2:
        raise PrecisionError(f"h = {h} too small for binary64: cancellation error ~{rounding:.3g} "
                             f"(condition ~{1 / (h * h * abs(d2)):.3g})")
    # Taylor remainder with |rho^(4)| / 4! <= 1 (certified) on [-1, 1]
    truncation = 2 * h * h / abs(d2)
    blk = SquareBlock(spec.name, float(spec.alpha), float(h))
    xs = probe_grid(-1, 1) if grid is None else np.asarray(grid, float)
    err = float(np.max(np.abs(blk(xs) - xs * xs)))
    rep = ApproxReport(f"square via {spec.name}", (-1.0, 1.0), len(xs), err, truncation + rounding + 1e-9, 1, 2)
    return blk, rep


# --- operations on builder expressions ---------------------------------------------

class SquareOps:
    """Exact blocks for the square activation."""
    square_width, ident_width = 1, 2

    def square(self, t):
        return [t], lambda o: o[0]

    def ident(self, t):
        return [(t + 1) / 2, (t - 1) / 2], lambda o: o[0] - o[1]

    def product(self, a, c):
        p1, f1 = self.square((a + c) / 2)
        p2, f2 = self.square((a - c) / 2)
        return p1 + p2, lambda o: f1(o[:len(p1)]) - f2(o[len(p1):])


class RhoOps(SquareOps):
    """Approximate blocks for a smooth activation (mpfr or binary64 constants)."""
    square_width, ident_width = 2, 1

    def __init__(self, spec, h_sq, h_id):
        self.spec = spec
        self.alpha = spec.mp_point("alpha")
        self.a = spec.mp_point("deriv")
        self.h_sq, self.h_id = h_sq, h_id
        self.r_alpha = spec.mp(self.alpha)
        self.d2 = spec.mp_derivatives(self.alpha)[1]
        self.r_a = spec.mp(self.a)
        self.d1 = spec.mp_derivatives(self.a)[0]
        self.c_sq = 1 / (h_sq * h_sq * self.d2)
        self.c_id = 1 / (h_id * self.d1)

    def square(self, t):
        pres = [self.alpha + self.h_sq * t, self.alpha - self.h_sq * t]
        return pres, lambda o: (o[0] + o[1]) * self.c_sq - 2 * self.r_alpha * self.c_sq

    def ident(self, t):
        return [self.a + self.h_id * t], lambda o: o[0] * self.c_id - self.r_a * self.c_id


# --- inverse chain ------------------------------------------------------------------

def inverse_bound(eps_domain, m):
    e = Fraction(eps_domain)
    return (1 - e) ** (2 ** (m + 1)) / e


def _inverse_lane(b, ops, x, m):
    """prod_{i=0}^{m} (1 + z^(2^i)) for z = 1 - x; m + 1 layers."""
    z = 1 - x
    v = 1 + z                       # first factor, affine in the input
    parts = [ops.square(z), ops.ident(v)]
    w, v = split(parts, (yield flat(parts)))
    for k in range(1, m + 1):
        parts = [ops.product(v, 1 + w)]
        if k < m:
            parts.append(ops.square(w))
        vals = split(parts, (yield flat(parts)))
        v = vals[0]
        if k < m:
            w = vals[1]
    return v


def inverse_chain(eps_domain, m):
    """Width-3 square-activation network for 1/x on [eps, 2 - eps] and its error bound."""
    e = Fraction(eps_domain)
    if not 0 < e < 1:
        raise ValueError("eps_domain must lie in (0, 1)")
    if m < 1:
        raise ValueError("m must be >= 1")
    b = NetBuilder(1, activation="square", mode=RATIONAL)
    out = run(b, _inverse_lane(b, SquareOps(), b.inputs()[0], m))
    return b.finish([out]), inverse_bound(e, m)


# --- rational ReLU approximation ------------------------------------------------------

def newman_xi(n):
    return mpmath.exp(-1 / mpmath.sqrt(n))


def newman_rational_reference(n: int, x):
    """R(x) = x P(x) / (P(x) + P(-x)), P(x) = prod_{k<n} (x + xi^k), xi = exp(-1/sqrt n)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    with mpmath.workdps(40):
        xi = newman_xi(n)
        roots = [xi ** k for k in range(n)]

        def one(t):
            t = mpmath.mpf(t)
            p = mpmath.fprod(t + r for r in roots)
            q = mpmath.fprod(-t + r for r in roots)
            return t * p / (p + q)

        if np.ndim(x) == 0:
            return float(one(x))
        return np.array([float(one(t)) for t in np.asarray(x, float)])


def chain_length(n: int) -> int:
    """Smallest integer m satisfying the inverse-chain inequality for Newman degree n."""
    s = math.sqrt(n)
    t = s * (n + 1) / 2
    return math.ceil(n - 2 + (t + math.log(s + t + (n - 1) * math.log(2))) / math.log(2))


def newman_gap_bound(n: int) -> float:
    """Lower bound 2 xi^(n(n+1)/2) / 2^n on (P(x) + P(-x)) / 2^n over [-1, 1], as log2."""
    return 1 - n - (n * (n + 1) / 2) / math.sqrt(n) / math.log(2)


def newman_precision(n: int, m: int | None = None):
    """(bits, log2 target) for the mpfr construction: block errors well below the gap."""
    m = chain_length(n) if m is None else m
    log_tau = newman_gap_bound(n) - 24 - math.log2(n + m + 2)
    bits = int(math.ceil(-2 * log_tau)) + 24
    return bits, log_tau


def newman_coefficients(n: int):
    """Coefficients of P(x) / 2^n, lowest degree first (current gmpy2 context)."""
    xi = gmpy2.exp(-1 / gmpy2.sqrt(gmpy2.mpfr(n)))
    poly = [gmpy2.mpfr(1)]
    for k in range(n):
        r = xi ** k
        nxt = [gmpy2.mpfr(0)] * (len(poly) + 1)
        for i, c in enumerate(poly):
            nxt[i] += c * r
            nxt[i + 1] += c
        poly = nxt
    return [c / 2 ** n for c in poly]


def newman_lane(b, ops, x, n, m, coeffs):
    """R(x) for |x| <= 1 using products, squares and identities of ``ops``.

    Layers 1..n-1 build x^2..x^n and the even/odd parts of P(x)/2^n; layer n
    forms u = x P(x)/2^n; the remaining m + 1 layers multiply u by the factors
    (1 + z^(2^i)), z = 1 - (P(x) + P(-x))/2^n, keeping every value bounded by 1.
    """
    E = coeffs[0] + 0 * x
    O = coeffs[1] * x
    if n >= 2:
        parts = [ops.ident(x), ops.square(x)]
        x, pw = split(parts, (yield flat(parts)))
        E = coeffs[0] + coeffs[2] * pw
        O = coeffs[1] * x
        for k in range(2, n):
            parts = [ops.ident(x), ops.product(x, pw), ops.ident(E), ops.ident(O)]
            x, pw, E, O = split(parts, (yield flat(parts)))
            if (k + 1) % 2:
                O = O + coeffs[k + 1] * pw
            else:
                E = E + coeffs[k + 1] * pw
    z = 1 - 2 * E
    parts = [ops.product(x, E + O), ops.ident(z)]
    v, w = split(parts, (yield flat(parts)))
    for j in range(m + 1):
        parts = [ops.product(v, 1 + w)]
        if j < m:
            parts.append(ops.square(w))
        vals = split(parts, (yield flat(parts)))
        v = vals[0]
        if j < m:
            w = vals[1]
    return v


def _newman_ops(spec, log_tau):
    """Block step sizes for absolute block error about 2^log_tau (current context)."""
    tau = gmpy2.exp2(gmpy2.mpfr(log_tau))
    _, d2 = spec.mp_derivatives(spec.mp_point("alpha"))
    d1, _ = spec.mp_derivatives(spec.mp_point("deriv"))
    # square: error <= 2 h^2 t^4 / |rho''| with |t| <= 3/2; identity: h^2 |t|^3 / |rho'|
    h_sq = gmpy2.sqrt(tau * abs(d2) / 12)
    h_id = gmpy2.sqrt(tau * abs(d1) / 4)
    return RhoOps(spec, h_sq, h_id)


def build_newman_block(b, spec, x, n, m=None):
    """Lane computing R(x) with activation ``spec``; builder must run in mpfr context."""
    m = chain_length(n) if m is None else m
    _, log_tau = newman_precision(n, m)
    ops = _newman_ops(spec, log_tau)
    return newman_lane(b, ops, x, n, m, newman_coefficients(n))


def relu_from_activation_net(act, n: int, mode: str = MPFR, precision: int | None = None,
                             verify: bool = True, grid=None):
    """Width <= 8 network with activation ``act`` approximating max(0, x) on [-1, 1].

    The construction needs about 2 * log2(2^n / xi^(n(n+1)/2)) bits, so it is
    built in mpfr; binary64 is refused once that exceeds 53 bits.
    """
    spec = get_activation(act) if isinstance(act, str) else act
    if n < 1:
        raise ValueError("n must be >= 1")
    m = chain_length(n)
    bits, _ = newman_precision(n, m)
    if mode == BINARY64:
        if bits > 53:
            raise PrecisionError(f"n = {n} needs about {bits} bits of precision; binary64 has 53 "
                                 f"(use mode='mpfr')")
        precision = 53
    elif mode == MPFR:
        precision = max(bits, precision or 0)
    else:
        raise PrecisionError("the construction is not exact; use mode 'mpfr' or 'binary64'")
    with mp_context(precision):
        b = NetBuilder(1, activation=spec.name, mode=MPFR, precision=precision)
        out = run(b, build_newman_block(b, spec, b.inputs()[0], n, m))
        net = b.finish([out])
    if mode == BINARY64:
        net = net.with_mode(BINARY64)
    bound = 2.5 * math.exp(-math.sqrt(n)) + 1e-6
    rep = None
    if verify:
        xs = probe_grid(-1, 1) if grid is None else np.asarray(grid, float)
        err = max_abs_error(net, xs, np.maximum(xs, 0))
        rep = ApproxReport(f"relu via {spec.name}, n = {n}, m = {m}", (-1.0, 1.0), len(xs), err, bound,
                           net.depth, net.width)
    return net, rep


def max_abs_error(net: Network, xs, target) -> float:
    ys = eval_batch(net, [[float(x)] for x in xs])[:, 0]
    return float(np.max(np.abs(np.array([float(y) for y in ys]) - np.asarray(target, float))))
