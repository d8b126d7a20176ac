"""One-dimensional constructions: maximal-region networks and PWL compilers."""
from __future__ import annotations

import math
from fractions import Fraction

from .core.builder import Lin, NetBuilder
from .core.network import Network
from .core.pwl import Pwl1D, network_to_pwl1d

F0, F1 = Fraction(0), Fraction(1)


class CaseAnalysisError(RuntimeError):
    """Neither reduction case applied; carries the extended height sequence."""


# --- maximal region construction -------------------------------------------

def g_neurons(n: int):
    """(outer coefficient, slope, intercept) of each neuron of g_n, plus the bias.

    g_n(x) = bias + sum_i c_i * relu(s_i * x + t_i).
    """
    if n < 2:
        raise ValueError("g_n needs n >= 2")
    if n == 2:
        return [(F1 * -1, Fraction(-3), F1), (F1 * -1, Fraction(3), Fraction(-2))], F1
    m = 2 * n + 1
    neurons = [(Fraction(-3, 2), Fraction(m), Fraction(-1)),
               (F1, Fraction(m), Fraction(-3)),
               (-F1, Fraction(-m), Fraction(5))]
    for i in range(4, n + 1):
        neurons.append((Fraction((-1) ** i), Fraction(m), Fraction(-(2 * i - 1))))
    return neurons, Fraction(5)


def build_max_region_network(design) -> Network:
    """Composition g_{n_L} o ... o g_{n_1} realising the exact 1-D maximum."""
    d = tuple(design)
    if d[0] != 1 or d[-1] != 1:
        raise ValueError("expects n_0 = n_(L+1) = 1")
    hidden = d[1:-1]
    if not hidden or any(n < 2 for n in hidden):
        raise ValueError("hidden widths must be >= 2")
    b = NetBuilder(1)
    cur = b.inputs()[0]
    for n in hidden:
        neurons, bias = g_neurons(n)
        outs = b.layer([s * cur + t for _, s, t in neurons])
        cur = bias + sum((c * o for (c, _, _), o in zip(neurons, outs)), b.zero())
    return b.finish([cur])


# --- helpers for one-layer PWL factors ----------------------------------------

def _sgn(v):
    return (v > 0) - (v < 0)


def _pieces(f: Pwl1D):
    """Knots, knot heights and slopes of f."""
    return list(f.breakpoints), list(f.knot_values), list(f.slopes)


def three_piece_terms(x1, y1, a1, a2, a3, x2):
    """Neuron terms of the base-case formula for a function with <= 3 pieces.

    y1 - sgn(a1) relu(-|a1|(x - x1)) + sgn(a2) relu(|a2|(x - x1))
       + sgn(a3 - a2) relu(|a3 - a2|(x - x2)),
    returned as (outer coefficient, slope, intercept) triples and the constant.
    """
    d = a3 - a2
    terms = [(-_sgn(a1), -abs(a1), abs(a1) * x1),
             (_sgn(a2), abs(a2), -abs(a2) * x1),
             (_sgn(d), abs(d), -abs(d) * x2)]
    return [(Fraction(c), s, t) for c, s, t in terms], y1


def _base_params(f: Pwl1D):
    xs, ys, a = _pieces(f)
    if f.k == 1:
        x1 = F0
        return x1, f(x1), a[0], a[0], a[0], x1 + 1
    if f.k == 2:
        return xs[0], ys[0], a[0], a[1], a[1], xs[0] + 1
    if f.k == 3:
        return xs[0], ys[0], a[0], a[1], a[2], xs[1]
    raise ValueError("base case handles at most 3 pieces")


def _base_layer(b: NetBuilder, f: Pwl1D, x: Lin) -> Lin:
    terms, const = three_piece_terms(*_base_params(f))
    outs = b.layer([s * x + t for _, s, t in terms])
    return const + sum((c * o for (c, _, _), o in zip(terms, outs)), b.zero())


def _identity_layer(b: NetBuilder, x: Lin) -> Lin:
    p, n, _ = b.layer([x, -x, b.zero()])
    return p - n


# --- width-3 compiler -----------------------------------------------------

def _ext_heights(f: Pwl1D):
    """Heights y_0..y_k as comparable keys (s, v): s = -1/+1 for -inf/+inf."""
    xs, ys, a = _pieces(f)
    k = f.k
    y = [None] * (k + 1)
    for i in range(1, k):
        y[i] = (0, ys[i - 1])
    y[0] = (1, F0) if a[0] < 0 else ((0, ys[0]) if a[0] == 0 else (-1, F0))
    y[k] = (1, F0) if a[-1] > 0 else ((0, ys[-1]) if a[-1] == 0 else (-1, F0))
    return y


def _fmt_heights(y):
    return ["+inf" if s > 0 else "-inf" if s < 0 else str(v) for s, v in y]


def _monotone(*vals):
    return all(p <= q for p, q in zip(vals, vals[1:])) or all(p >= q for p, q in zip(vals, vals[1:]))


def factor_step(f: Pwl1D):
    """One reduction step f = g o h with h of <= 3 pieces and g of fewer pieces than f.

    Scans i ascending for the monotone-triple case, then for the interleaved
    quadruple case.  Returns (g, h, case label).
    """
    k = f.k
    xs, ys, a = _pieces(f)
    y = _ext_heights(f)
    # 1-based accessors
    X = lambda i: xs[i - 1]
    Y = lambda i: ys[i - 1]
    A = lambda i: a[i - 1]

    for i in range(1, k):
        if not _monotone(y[i - 1], y[i], y[i + 1]):
            continue
        ai, an = A(i), A(i + 1)
        if an != 0:
            r = ai / an
            if i == 1:
                # x_0 sits at -infinity: rescale the first piece only
                h = Pwl1D.from_knots([X(1)], [X(1)], r, 1)
                g = Pwl1D.from_knots(xs[1:], ys[1:], an, a[-1])
                return g, h, "1.1"
            delta = (X(i) - X(i - 1)) * (r - 1)
            h = Pwl1D.from_knots([X(i - 1), X(i)], [X(i - 1), X(i) + delta], 1, 1)
            gx = xs[:i - 1] + [x + delta for x in xs[i:]]
            gy = ys[:i - 1] + ys[i:]
            g = Pwl1D.from_knots(gx, gy, a[0], a[-1])
            return g, h, "1.1"
        # a_{i+1} == 0: flat piece i+1
        if i + 1 <= k - 1:
            w = X(i + 1) - X(i)
            h = Pwl1D.from_knots([X(i), X(i + 1)], [X(i), X(i)], 1, 1)
            gx = xs[:i] + [x - w for x in xs[i + 1:]]
            gy = ys[:i] + ys[i + 1:]
            g = Pwl1D.from_knots(gx, gy, a[0], a[-1])
            return g, h, "1.2"
        # last piece flat
        h = Pwl1D.from_knots([X(k - 1)], [X(k - 1)], 1, 0)
        if k - 1 == 1:
            g = Pwl1D.affine(A(k - 1), Y(1) - A(k - 1) * X(1))
        else:
            g = Pwl1D.from_knots(xs[:k - 2], ys[:k - 2], a[0], A(k - 1))
        return g, h, "1.2"

    for i in range(1, k - 1):
        if i + 2 > k:
            break
        if A(i) == 0 or A(i + 1) == 0 or A(i + 2) == 0:
            continue
        if not _monotone(y[i - 1], y[i + 1], y[i], y[i + 2]):
            continue
        ai, a1, a2 = A(i), A(i + 1), A(i + 2)
        # knots x_i and x_{i+1} exist; x_{i-1}, x_{i+2} may be at infinity
        hx = [X(i), X(i + 1)]
        hy = [X(i), X(i) + a1 / ai * (X(i + 1) - X(i))]
        h = Pwl1D.from_knots(hx, hy, 1, a2 / ai)
        # g: line of slope a_i through knot i (equivalently through knot i-1)
        gx, gy = xs[:i - 1], ys[:i - 1]
        if i + 2 <= k - 1:
            xhat = X(i) + a1 / ai * (X(i + 1) - X(i)) + a2 / ai * (X(i + 2) - X(i + 1))
            gx = gx + [xhat] + [xhat + a2 / ai * (X(j) - X(i + 2)) for j in range(i + 3, k)]
            gy = gy + [Y(i + 2)] + [Y(j) for j in range(i + 3, k)]
            right = a[-1] * ai / a2
        else:
            right = ai
        g = Pwl1D.from_knots(gx, gy, a[0], right)
        return g, h, "2"

    raise CaseAnalysisError("no reduction case applies; heights " + ", ".join(_fmt_heights(y)))


def compile_width3(f: Pwl1D) -> Network:
    """Exact width-3 network with max(1, k - 2) hidden layers computing f."""
    if not isinstance(f, Pwl1D):
        raise TypeError("expects a Pwl1D")
    target = max(1, f.k - 2)
    factors = []  # h's, innermost first
    g = f
    while g.k > 3:
        g_next, h, _ = factor_step(g)
        if g_next.k >= g.k:
            raise CaseAnalysisError("reduction step did not reduce the piece count")
        if g_next.compose(h) != g:
            raise CaseAnalysisError(f"factorisation check failed: g o h != f for f = {g!r}")
        factors.append(h)
        g = g_next
    b = NetBuilder(1)
    x = b.inputs()[0]
    for h in factors:
        x = _base_layer(b, h, x)
    x = _base_layer(b, g, x)
    while b.depth < target:
        x = _identity_layer(b, x)
    return b.finish([x])


# --- width-W compiler -----------------------------------------------------

def slope_terms(f: Pwl1D):
    """f = const + sum c_j relu(s_j x + t_j), one term per linear region, left to right."""
    xs, ys, a = _pieces(f)
    if f.k == 1:
        return [], f(F0), a[0]
    x1, y1 = xs[0], ys[0]
    terms = [(-a[0], -F1, x1), (a[1], F1, -x1)]
    for j in range(1, f.k - 1):
        terms.append((a[j + 1] - a[j], F1, -xs[j]))
    return terms, y1, None


def compile_widthW(f: Pwl1D, W: int) -> Network:
    """Exact width-W network (W >= 5) with max(1, ceil((k-2)/(W-4))) hidden layers.

    Every layer stores x as (relu(x), relu(-x)); from the second layer on two
    more neurons carry the running sum the same way; the rest emit one
    slope-difference term each.
    """
    if W < 5:
        raise ValueError("width must be >= 5 (width 4 leaves no room for terms)")
    terms, const, lin = slope_terms(f)
    k = f.k
    depth = max(1, math.ceil((k - 2) / (W - 4)))
    b = NetBuilder(1)
    x = b.inputs()[0]
    pending = list(terms)
    for layer in range(depth):
        cap = W - 2 if layer == 0 else W - 4
        chunk, pending = pending[:cap], pending[cap:]
        pre = [x, -x]
        if layer > 0:
            pre += [total, -total]
        pre += [s * x + t for _, s, t in chunk]
        pre += [b.zero()] * (W - len(pre))
        outs = b.layer(pre)
        if layer == 0:
            # the initial sum is affine in x, re-expressed through the stored x
            total = b.constant(const) + (lin or 0) * (outs[0] - outs[1])
            off = 2
        else:
            total = outs[2] - outs[3]
            off = 4
        x = outs[0] - outs[1]
        total = total + sum((c * outs[off + i] for i, (c, _, _) in enumerate(chunk)), b.zero())
    if pending:
        raise AssertionError("terms left over; depth formula violated")
    return b.finish([total])


def verify_compiled(f: Pwl1D, net: Network) -> bool:
    """Canonical-form equality of the compiled network with f."""
    return network_to_pwl1d(net) == f
