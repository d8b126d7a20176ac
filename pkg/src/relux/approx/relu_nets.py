"""ReLU networks approximating x^2, polynomials and catalog activations."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..core.builder import NetBuilder
from ..core.network import Network, eval_batch
from ..core.scalars import BINARY64, RATIONAL
from .catalog import ApproxReport, get_activation, normalized_derivatives, probe_grid
from .lanes import hold_pair, hold_shifted, parallel, run, sawtooth_lane, sawtooth_product

SLACK = 1e-9


def _report(net, target, lo, hi, f, bound, xs=None):
    xs = probe_grid(lo, hi) if xs is None else np.asarray(xs, float)
    ys = eval_batch(net, xs[:, None])[:, 0].astype(float)
    err = float(np.max(np.abs(ys - f(xs))))
    return ApproxReport(target, (float(lo), float(hi)), len(xs), err, float(bound), net.depth, net.width)


# --- sawtooth square ------------------------------------------------------------------

def sawtooth_square_net(n: int, verify: bool = True):
    """Width 3, depth n + 3 ReLU net: the dyadic interpolant of x^2 on [-1, 1], clipped at 1."""
    if n < 0:
        raise ValueError("n must be >= 0")
    b = NetBuilder(1)
    out = run(b, sawtooth_lane(b, b.inputs()[0], n))
    net = b.finish([out])
    rep = None
    if verify:
        rep = _report(net.with_mode(BINARY64), f"x^2, n = {n}", -1, 1, np.square, 4.0 ** -n + SLACK)
    return net, rep


# --- polynomials ----------------------------------------------------------------------

def square_depth(m: int, c_max, eps) -> int:
    """Sawtooth depth n with 4^-n <= eps / (2 C m (m - 1)) and 2^n >= 2m."""
    if m < 2 or c_max == 0:
        return 0
    delta = eps / (2 * float(c_max) * m * (m - 1))
    return max(math.ceil(math.log(1 / delta, 4)), math.ceil(math.log2(2 * m)), 0)


def poly_lane(b, t, coeffs, n_s):
    """sum c_k t^k for |t| <= 1; width 8 (t, two squares, the running sum).

    The powers are formed as t * t^(k-1) with sawtooth products; every
    product lies in [-1, 1], so the sum is bounded by sum |c_k| for any t.
    """
    coeffs = list(coeffs)
    m = len(coeffs) - 1
    while m > 0 and coeffs[m] == 0:
        m -= 1
    bound = sum(abs(c) for c in coeffs) + 1
    s = coeffs[0] + (coeffs[1] * t if m >= 1 else 0 * t)
    if m < 2:
        s, = yield from parallel(hold_shifted(b, s, bound, 1))
        return s
    p = t
    steps = n_s + 3
    for k in range(2, m + 1):
        t, p, s = yield from parallel(hold_shifted(b, t, 1, steps), sawtooth_product(b, t, p, n_s),
                                      hold_shifted(b, s, bound, steps))
        s = s + coeffs[k] * p
    return s


def relu_polynomial_net(coeffs, eps, verify: bool = True):
    """Width-8 ReLU net within eps of sum coeffs[k] x^k on [-1, 1]."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    coeffs = [Fraction(c) for c in coeffs] or [Fraction(0)]
    m = max((k for k, c in enumerate(coeffs) if c != 0), default=0)
    c_max = max((abs(c) for c in coeffs[2:]), default=0)
    n_s = square_depth(m, c_max, eps)
    b = NetBuilder(1)
    out = run(b, poly_lane(b, b.inputs()[0], coeffs[:m + 1], n_s))
    net = b.finish([out])
    rep = None
    if verify:
        cf = [float(c) for c in coeffs[:m + 1]]
        rep = _report(net.with_mode(BINARY64), f"polynomial of degree {m}", -1, 1,
                      lambda x: np.polyval(cf[::-1], x), eps + SLACK)
    return net, rep


# --- catalog activations ------------------------------------------------------------

@dataclass(frozen=True)
class Window:
    lo: float
    center: float
    hi: float
    coeffs: tuple      # Taylor coefficients at center, degree m
    bound: float       # M >= |S - l| anywhere on the real line


@dataclass(frozen=True)
class ActivationPlan:
    name: str
    eps: float
    ramp: float        # width of the overlaps / trapezoid flanks
    windows: tuple
    n_s: int
    n_p: int
    acc_bound: float

    @property
    def depth(self) -> int:
        return sum(_poly_depth(w, self.n_s) + 1 + self.n_p + 3 for w in self.windows) + 1


def _poly_depth(w, n_s):
    m = len(w.coeffs) - 1
    return 1 if m < 2 else (m - 1) * (n_s + 3)


def _envelope_tail(act, k_max):
    tail, k = 0.0, k_max + 1
    while k < k_max + 10 ** 5:
        try:
            term = act.envelope(k)
        except OverflowError:
            break
        tail += term
        if term < 1e-30 * max(tail, 1e-300):
            break
        k += 1
    return tail


def taylor_degree(name, center, tol, k_max=100):
    """Smallest m with sum_{k > m} |rho^(k)(center)| / k! <= tol (tail past k_max from the envelope)."""
    act = get_activation(name)
    tail = _envelope_tail(act, k_max)
    if tail > tol:
        raise ValueError(f"{name}: tolerance {tol:g} is below the envelope tail past degree {k_max}")
    c = [abs(float(v)) for v in normalized_derivatives(name, center, k_max)]
    for m in range(k_max, 0, -1):
        if tail + c[m] > tol:
            return max(m, 1)
        tail += c[m]
    return 1


def activation_plan(act, eps) -> ActivationPlan:
    spec = get_activation(act) if isinstance(act, str) else act
    if not 0 < eps < Fraction(1, 3):
        raise ValueError("eps must lie in (0, 1/3)")
    eps = float(eps)
    ramp = eps
    radius = spec.far_field_radius(eps / 2) + ramp
    lo = -radius
    wins = []
    while True:
        center = lo + 1
        m = taylor_degree(spec.name, center, eps / 4)
        cf = tuple(float(v) for v in normalized_derivatives(spec.name, center, m))
        lmax = float(np.max(np.abs(spec.l_values(np.linspace(lo - ramp, lo + 2 + ramp, 101)))))
        lmax = max(lmax, *(abs(float(v)) for v in spec.l_values([lo, lo + 2])))
        wins.append(Window(lo, center, lo + 2, cf, sum(abs(c) for c in cf) + lmax + 1e-9))
        if lo + 2 >= radius:
            break
        lo += 2 - ramp
    m = max(len(w.coeffs) - 1 for w in wins)
    n_s = square_depth(m, max((max(map(abs, w.coeffs[2:]), default=0) for w in wins), default=0), eps / 4)
    big_m = max(w.bound for w in wins)
    n_p = max(0, math.ceil(math.log(16 * big_m / eps, 4)))
    return ActivationPlan(spec.name, eps, ramp, tuple(wins), n_s, n_p, 2 * big_m * len(wins) + 2)


def _l_terms(spec, x):
    """Pre-activations and combiner for l(x) through ReLU neurons."""
    l = spec.asymptotic_pwl
    xs, sl = list(l.breakpoints), list(l.slopes)
    if not xs:
        if sl[0] != 0:
            raise ValueError("an unbounded affine l needs a breakpoint")
        return [], lambda o: l(0)
    pres = [x - xs[0], -(x - xs[0])]
    pres += [x - q for q in xs[1:]]

    def post(o):
        v = l(xs[0]) + sl[1] * o[0] - sl[0] * o[1]
        for j, q in enumerate(xs[1:]):
            v = v + (sl[j + 2] - sl[j + 1]) * o[2 + j]
        return v
    return pres, post


def activation_lane(b, plan: ActivationPlan, x):
    """Width <= 11 ReLU lane computing an approximation of the activation at x (any real x)."""
    spec = get_activation(plan.name)
    B = plan.acc_bound
    acc = 0 * x
    r = plan.ramp
    for w in plan.windows:
        steps = _poly_depth(w, plan.n_s)
        x, s, acc = yield from parallel(hold_pair(b, x, steps), poly_lane(b, x - w.center, w.coeffs, plan.n_s),
                                        hold_shifted(b, acc, B, steps))
        # trapezoid: clip((x - lo)/r) + clip((hi - x)/r) - 1
        up = (x - w.lo) / r
        dn = (w.hi - x) / r
        lp, lpost = _l_terms(spec, x)
        sb = w.bound + 1
        pres = [x, -x, up, up - 1, dn, dn - 1] + lp + [s + sb, acc + B]
        o = yield pres
        x = o[0] - o[1]
        phi = o[2] - o[3] + o[4] - o[5] - 1
        lv = lpost(o[6:6 + len(lp)])
        s = o[6 + len(lp)] - sb
        acc = o[7 + len(lp)] - B
        v = (s - lv) / w.bound
        steps = plan.n_p + 3
        x, prod, acc = yield from parallel(hold_pair(b, x, steps), sawtooth_product(b, phi, v, plan.n_p),
                                           hold_shifted(b, acc, B, steps))
        acc = acc + w.bound * prod
    lp, lpost = _l_terms(spec, x)
    o = yield lp + [acc + B]
    return lpost(o[:len(lp)]) + o[len(lp)] - B


def relu_activation_approx_net(act, eps, verify: bool = True, interval=None):
    """Width-11 ReLU net within eps of the activation on the whole line (checked on a wide grid)."""
    spec = get_activation(act) if isinstance(act, str) else act
    plan = activation_plan(spec, eps)
    b = NetBuilder(1, mode=BINARY64)
    out = run(b, activation_lane(b, plan, b.inputs()[0]))
    net = b.finish([out])
    rep = None
    if verify:
        if interval is None:
            t = plan.windows[-1].hi + 4
            interval = (-t, t)
        rep = _report(net, f"{spec.name} via ReLU", interval[0], interval[1], spec.evaluate, float(eps) + SLACK)
    return net, rep
