"""Exact one-dimensional piecewise-affine functions and their region analysis."""
from __future__ import annotations

import bisect
import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .network import DimensionError, Network
from .scalars import RATIONAL, ModeError, format_rational, parse_rational, to_fraction

F0 = Fraction(0)


@dataclass(frozen=True)
class RegionReport:
    regions: int
    nonconstant_regions: int
    monotone_regions: int | None = None
    cells: list | None = None
    method: str = "exact-1d"

    def __post_init__(self):
        if self.method not in ("exact-1d", "exact-2d-cells", "sampled-lower-bound"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.nonconstant_regions > self.regions:
            raise ValueError("more non-constant regions than regions")
        if self.monotone_regions is not None and self.monotone_regions > self.regions:
            raise ValueError("more monotone regions than regions")


class Pwl1D:
    """Continuous piecewise-affine function of one variable, stored canonically.

    ``breakpoints`` (k-1 of them, strictly increasing), ``slopes`` (k of them,
    adjacent ones distinct) and an ``anchor`` (x0, y0) with x0 the first
    breakpoint, or 0 when there is a single piece.
    """

    __slots__ = ("breakpoints", "slopes", "anchor", "_ys")

    def __init__(self, breakpoints: Sequence, slopes: Sequence, anchor):
        bp = tuple(to_fraction(b) for b in breakpoints)
        sl = tuple(to_fraction(s) for s in slopes)
        x0, y0 = (to_fraction(anchor[0]), to_fraction(anchor[1]))
        if len(sl) != len(bp) + 1:
            raise ValueError("need exactly one more slope than breakpoints")
        if any(a >= b for a, b in zip(bp, bp[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if any(a == b for a, b in zip(sl, sl[1:])):
            raise ValueError("adjacent slopes must differ (use Pwl1D.from_knots to canonicalize)")
        if x0 != (bp[0] if bp else F0):
            raise ValueError("anchor must sit on the first breakpoint (or at 0)")
        self.breakpoints, self.slopes, self.anchor = bp, sl, (x0, y0)
        ys = [y0]
        for i in range(1, len(bp)):
            ys.append(ys[-1] + sl[i] * (bp[i] - bp[i - 1]))
        self._ys = tuple(ys)

    # -- construction ------------------------------------------------------
    @classmethod
    def from_knots(cls, xs, ys, left_slope, right_slope) -> "Pwl1D":
        """Canonical function through knots (xs, ys) with the given end slopes.

        Knots that do not change the slope are dropped.  With no knots the
        function is the line of slope ``left_slope`` through (0, ys) -- pass
        ``ys`` as a scalar intercept in that case.
        """
        xs = [to_fraction(x) for x in xs]
        if not xs:
            if left_slope != right_slope:
                raise ValueError("a knot-free function has a single slope")
            b = to_fraction(ys)
            return cls((), (to_fraction(left_slope),), (F0, b))
        ys = [to_fraction(y) for y in ys]
        if any(a >= b for a, b in zip(xs, xs[1:])):
            raise ValueError("knots must be strictly increasing")
        slopes = [to_fraction(left_slope)]
        slopes += [(ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]) for i in range(len(xs) - 1)]
        slopes.append(to_fraction(right_slope))
        keep = [i for i in range(len(xs)) if slopes[i] != slopes[i + 1]]
        if not keep:
            s = slopes[0]
            return cls((), (s,), (F0, ys[0] - s * xs[0]))
        bp = [xs[i] for i in keep]
        sl = [slopes[0]] + [slopes[i + 1] for i in keep]
        return cls(bp, sl, (bp[0], ys[keep[0]]))

    @classmethod
    def affine(cls, slope, intercept=0) -> "Pwl1D":
        return cls((), (to_fraction(slope),), (F0, to_fraction(intercept)))

    # -- basic access ------------------------------------------------------
    @property
    def k(self) -> int:
        """Number of linear regions."""
        return len(self.slopes)

    @property
    def knot_values(self) -> tuple:
        return self._ys

    def __call__(self, x):
        x = to_fraction(x)
        bp, sl = self.breakpoints, self.slopes
        if not bp:
            return self.anchor[1] + sl[0] * x
        i = bisect.bisect_right(bp, x)
        if i == 0:
            return self._ys[0] + sl[0] * (x - bp[0])
        return self._ys[i - 1] + sl[i] * (x - bp[i - 1])

    def __eq__(self, other):
        return (isinstance(other, Pwl1D) and self.breakpoints == other.breakpoints
                and self.slopes == other.slopes and self.anchor == other.anchor)

    def __hash__(self):
        return hash((self.breakpoints, self.slopes, self.anchor))

    def __repr__(self):
        fmt = lambda v: str(v)
        return (f"Pwl1D(breakpoints=[{', '.join(map(fmt, self.breakpoints))}], "
                f"slopes=[{', '.join(map(fmt, self.slopes))}], anchor=({self.anchor[0]}, {self.anchor[1]}))")

    # -- arithmetic --------------------------------------------------------
    def _combine(self, other: "Pwl1D", op) -> "Pwl1D":
        xs = sorted(set(self.breakpoints) | set(other.breakpoints))
        if not xs:
            return Pwl1D.affine(op(self.slopes[0], other.slopes[0]), op(self(0), other(0)))
        return Pwl1D.from_knots(xs, [op(self(x), other(x)) for x in xs],
                                op(self.slopes[0], other.slopes[0]), op(self.slopes[-1], other.slopes[-1]))

    def __add__(self, other):
        if not isinstance(other, Pwl1D):
            other = Pwl1D.affine(0, other)
        return self._combine(other, lambda a, b: a + b)

    __radd__ = __add__

    def __sub__(self, other):
        if not isinstance(other, Pwl1D):
            other = Pwl1D.affine(0, other)
        return self._combine(other, lambda a, b: a - b)

    def __rsub__(self, other):
        return Pwl1D.affine(0, other) - self

    def __neg__(self):
        return self * -1

    def __mul__(self, c):
        c = to_fraction(c)
        if c == 0:
            return Pwl1D.affine(0, 0)
        return Pwl1D(self.breakpoints, [s * c for s in self.slopes], (self.anchor[0], self.anchor[1] * c))

    __rmul__ = __mul__

    def knots(self):
        return list(zip(self.breakpoints, self._ys))

    def compose(self, inner: "Pwl1D") -> "Pwl1D":
        """Exact canonical form of ``self(inner(x))``."""
        hb = list(inner.breakpoints)
        edges = [None] + hb + [None]
        pts = set(hb)
        for j in range(len(edges) - 1):
            lo, hi = edges[j], edges[j + 1]
            s = inner.slopes[j]
            if s == 0:
                continue
            ref = lo if lo is not None else (hi if hi is not None else F0)
            href = inner(ref)
            for b in self.breakpoints:
                x = ref + (b - href) / s
                if (lo is None or x > lo) and (hi is None or x < hi):
                    pts.add(x)

        def tail(s, at_plus):
            if s == 0:
                return F0
            goes_up = (s > 0) == at_plus
            return s * (self.slopes[-1] if goes_up else self.slopes[0])

        left, right = tail(inner.slopes[0], False), tail(inner.slopes[-1], True)
        xs = sorted(pts)
        if not xs:
            return Pwl1D.affine(left, self(inner(F0)))
        return Pwl1D.from_knots(xs, [self(inner(x)) for x in xs], left, right)

    def is_monotone(self) -> bool:
        return all(s >= 0 for s in self.slopes) or all(s <= 0 for s in self.slopes)

    def bounded_above(self) -> bool:
        return self.slopes[0] >= 0 and self.slopes[-1] <= 0

    def bounded_below(self) -> bool:
        return self.slopes[0] <= 0 and self.slopes[-1] >= 0


# --- layer-wise exact propagation -----------------------------------------

class _LayerFunctions:
    """A vector of PWL functions sharing one sorted knot list.

    ``vals[n][i]`` is neuron n at knot i; ``left[n]``/``right[n]`` the tail slopes.
    """

    def __init__(self, xs, vals, left, right):
        self.xs, self.vals, self.left, self.right = xs, vals, left, right

    def value_at(self, n, t):
        xs, v = self.xs, self.vals[n]
        if t <= xs[0]:
            return v[0] + self.left[n] * (t - xs[0])
        if t >= xs[-1]:
            return v[-1] + self.right[n] * (t - xs[-1])
        i = bisect.bisect_right(xs, t)
        x0, x1 = xs[i - 1], xs[i]
        return v[i - 1] + (v[i] - v[i - 1]) * (t - x0) / (x1 - x0)

    def affine(self, weights, bias):
        m = len(self.xs)
        vals, left, right = [], [], []
        for row, b in zip(weights, bias):
            nz = [(j, w) for j, w in enumerate(row) if w != 0]
            vals.append([b + sum((w * self.vals[j][i] for j, w in nz), F0) for i in range(m)])
            left.append(sum((w * self.left[j] for j, w in nz), F0))
            right.append(sum((w * self.right[j] for j, w in nz), F0))
        return _LayerFunctions(self.xs, vals, left, right)

    def relu(self):
        xs = self.xs
        new = set()
        for n, v in enumerate(self.vals):
            for i in range(len(xs) - 1):
                a, b = v[i], v[i + 1]
                if (a < 0 < b) or (b < 0 < a):
                    new.add(xs[i] + a * (xs[i + 1] - xs[i]) / (a - b))
            sl, sr = self.left[n], self.right[n]
            if sl != 0 and v[0] / sl > 0:
                new.add(xs[0] - v[0] / sl)
            if sr != 0 and v[-1] / sr < 0:
                new.add(xs[-1] - v[-1] / sr)
        new.difference_update(xs)
        if new:
            nxs = sorted(set(xs) | new)
            vals = [[self.value_at(n, t) for t in nxs] for n in range(len(self.vals))]
        else:
            nxs, vals = xs, self.vals
        vals = [[t if t > 0 else F0 for t in v] for v in vals]
        left = [s if s < 0 else F0 for s in self.left]
        right = [s if s > 0 else F0 for s in self.right]
        return _LayerFunctions(nxs, vals, left, right)

    def prune(self):
        """Drop knots at which no neuron changes slope."""
        xs = self.xs
        if len(xs) <= 1:
            return self
        keep = []
        for i in range(len(xs)):
            kink = False
            for n, v in enumerate(self.vals):
                sl = self.left[n] if i == 0 else (v[i] - v[i - 1]) / (xs[i] - xs[i - 1])
                sr = self.right[n] if i == len(xs) - 1 else (v[i + 1] - v[i]) / (xs[i + 1] - xs[i])
                if sl != sr:
                    kink = True
                    break
            if kink:
                keep.append(i)
        if not keep:
            keep = [0]
        return _LayerFunctions([xs[i] for i in keep], [[v[i] for i in keep] for v in self.vals],
                               self.left, self.right)


def _check_1d_relu(net: Network):
    if net.activation != "relu":
        raise ModeError("exact 1-D propagation needs a relu network")
    if net.mode != RATIONAL:
        raise ModeError("exact 1-D propagation needs rational mode")
    if net.n_in != 1:
        raise DimensionError(f"expected n_0 = 1, got {net.n_in}")


def propagate_1d(net: Network) -> _LayerFunctions:
    """Exact output functions of a 1-D relu network (any output dimension)."""
    _check_1d_relu(net)
    lf = _LayerFunctions([F0], [[F0]], [Fraction(1)], [Fraction(1)])
    for i, layer in enumerate(net.layers):
        lf = lf.affine(layer.weights, layer.bias)
        if i < len(net.layers) - 1:
            lf = lf.relu().prune()
    return lf.prune()


def network_to_pwl1d(net: Network) -> Pwl1D:
    """The exact canonical PWL computed by a scalar 1-D relu network."""
    if net.n_out != 1:
        raise DimensionError(f"expected n_(L+1) = 1, got {net.n_out}")
    lf = propagate_1d(net)
    return Pwl1D.from_knots(lf.xs, lf.vals[0], lf.left[0], lf.right[0])


def count_regions_1d(net: Network) -> int:
    """Linear regions of a 1-D relu network with vector output."""
    lf = propagate_1d(net)
    if len(lf.xs) == 1:
        # a single knot survives pruning only if some output bends there
        for n in range(len(lf.vals)):
            if lf.left[n] != lf.right[n]:
                return 2
        return 1
    return len(lf.xs) + 1


# --- region report ----------------------------------------------------------

def _sign(v):
    return (v > 0) - (v < 0)


def monotone_runs(slopes) -> list:
    """Signs of the maximal monotone runs, plateaus absorbed as documented.

    A zero-slope piece joins the neighbouring run whose adjacent slope is
    larger in absolute value (left neighbour on ties).  An all-flat function is
    a single run.
    """
    s = list(slopes)
    signs = [_sign(v) for v in s]
    if all(g == 0 for g in signs):
        return [0]
    out = list(signs)
    for i, g in enumerate(signs):
        if g != 0:
            continue
        j = i
        while j > 0 and signs[j] == 0:
            j -= 1
        left = s[j] if signs[j] != 0 else None
        j = i
        while j < len(s) - 1 and signs[j] == 0:
            j += 1
        right = s[j] if signs[j] != 0 else None
        if right is None or (left is not None and abs(left) >= abs(right)):
            out[i] = _sign(left)
        else:
            out[i] = _sign(right)
    runs = [out[0]]
    for g in out[1:]:
        if g != runs[-1]:
            runs.append(g)
    return runs


def pwl1d_region_report(f: Pwl1D) -> RegionReport:
    return RegionReport(regions=f.k,
                        nonconstant_regions=sum(1 for s in f.slopes if s != 0),
                        monotone_regions=len(monotone_runs(f.slopes)),
                        method="exact-1d")


# --- exact L1 distance -----------------------------------------------------

def _abs_integral(p, q, dp, dq):
    """Exact integral of |d| over [p, q] for affine d with d(p)=dp, d(q)=dq."""
    if dp >= 0 and dq >= 0 or dp <= 0 and dq <= 0:
        return abs(dp + dq) * (q - p) / 2
    t = p + dp * (q - p) / (dp - dq)
    return (abs(dp) * (t - p) + abs(dq) * (q - t)) / 2


def exact_l1_distance_1d(f: Pwl1D, g: Pwl1D, interval) -> Fraction:
    a, b = to_fraction(interval[0]), to_fraction(interval[1])
    if not a < b:
        raise ValueError("empty interval")
    d = f - g
    pts = [a] + [x for x in d.breakpoints if a < x < b] + [b]
    return sum((_abs_integral(p, q, d(p), d(q)) for p, q in zip(pts, pts[1:])), F0)


# --- serialization ---------------------------------------------------------

def pwl_to_json(f: Pwl1D) -> dict:
    return {"breakpoints": [format_rational(x) for x in f.breakpoints],
            "slopes": [format_rational(s) for s in f.slopes],
            "anchor": [format_rational(f.anchor[0]), format_rational(f.anchor[1])]}


def pwl_from_json(d: dict) -> Pwl1D:
    from .network import NetworkFormatError

    def read(v, where):
        if isinstance(v, str):
            try:
                return parse_rational(v)
            except (ValueError, ZeroDivisionError):
                pass
        elif isinstance(v, int) and not isinstance(v, bool):
            return Fraction(v)
        raise NetworkFormatError(f"{where}: expected a 'p/q' string, got {v!r}")

    for key in ("breakpoints", "slopes", "anchor"):
        if not isinstance(d.get(key), list):
            raise NetworkFormatError(f"{key}: missing or not a list")
    if len(d["anchor"]) != 2:
        raise NetworkFormatError("anchor: expected [x0, y0]")
    try:
        return Pwl1D([read(v, f"breakpoints[{i}]") for i, v in enumerate(d["breakpoints"])],
                     [read(v, f"slopes[{i}]") for i, v in enumerate(d["slopes"])],
                     [read(v, f"anchor[{i}]") for i, v in enumerate(d["anchor"])])
    except ValueError as e:
        if isinstance(e, NetworkFormatError):
            raise
        raise NetworkFormatError(f"<root>: {e}") from None


def save_pwl(f: Pwl1D, path) -> None:
    with open(path, "w") as fh:
        json.dump(pwl_to_json(f), fh, indent=1)
        fh.write("\n")


def load_pwl(path) -> Pwl1D:
    from .network import NetworkFormatError
    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as e:
            raise NetworkFormatError(f"line {e.lineno}: {e.msg}") from None
    return pwl_from_json(d)
