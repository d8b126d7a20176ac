"""Width inefficiency, depth efficiency and Sobolev-rate experiments."""
from __future__ import annotations

import csv
import io
import itertools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .bounds import depth_efficiency_bound
from .compilend import PwlSimplicial, ReconstructionMismatch, compile_simplicial, kuhn_grid_interpolant
from .core.builder import NetBuilder
from .core.cells import cell_decomposition_2d, centroid, decompose_cells
from .core.network import Network, eval_network
from .core.pwl import Pwl1D, exact_l1_distance_1d, network_to_pwl1d, pwl1d_region_report
from .core.scalars import RATIONAL, ModeError, to_fraction

F0, F1, HALF = Fraction(0), Fraction(1), Fraction(1, 2)
MAX_GADGET_REGIONS = 10 ** 6


class CertificateFailure(AssertionError):
    """The counting chain or the final inequality failed for a candidate."""


# --- width inefficiency ---------------------------------------------------------------

def width_ineff_gadget(L: int) -> Network:
    """L^2 compositions of h(x) = 1 - relu(1 - 3x) - relu(3x - 1) + relu(6x - 4); width 3."""
    if L < 1:
        raise ValueError("L must be >= 1")
    b = NetBuilder(1)
    x = b.inputs()[0]
    for _ in range(L * L):
        o = b.layer([1 - 3 * x, 3 * x - 1, 6 * x - 4])
        x = 1 - o[0] - o[1] + o[2]
    return b.finish([x])


def gadget_pwl(L: int) -> Pwl1D:
    """The gadget as a Pwl1D: zigzag through (j/n, j mod 2), n = 3^(L^2), slope n outside [0, 1]."""
    n = 3 ** (L * L)
    if n > MAX_GADGET_REGIONS:
        raise ValueError(f"3^(L^2) = {n} regions exceed the exact budget {MAX_GADGET_REGIONS}")
    return Pwl1D.from_knots([Fraction(j, n) for j in range(n + 1)], [j % 2 for j in range(n + 1)], n, n)


def regions_in_unit_interval(f: Pwl1D) -> int:
    return 1 + sum(1 for x in f.breakpoints if 0 < x < 1)


@dataclass(frozen=True)
class SeparationCertificate:
    L: int
    gadget_regions: int
    candidate_regions: int
    non_good_intervals: int
    lower_bound: Fraction
    measured_l1: Fraction
    good_pairs: int = 0
    crossings: int = 0

    @property
    def holds(self) -> bool:
        return self.measured_l1 >= self.lower_bound

    def row(self) -> dict:
        return {"L": self.L, "gadget_regions": self.gadget_regions, "candidate_regions": self.candidate_regions,
                "non_good_intervals": self.non_good_intervals, "good_pairs": self.good_pairs,
                "crossings": self.crossings, "lower_bound": str(self.lower_bound),
                "measured_l1": str(self.measured_l1), "holds": self.holds}


def certificate_bound(L: int, k: int) -> Fraction:
    """(1/2)(3^(L^2) - k - 2) * (1/4) * 3^(-L^2)."""
    n = 3 ** (L * L)
    return Fraction(n - k - 2, 2) * Fraction(1, 4) / n


def _range_on(f: Pwl1D, a, b):
    vals = [f(a), f(b)] + [f(x) for x in f.breakpoints if a < x < b]
    return min(vals), max(vals)


def _sign_changes(f: Pwl1D, a, b, level):
    pts = [a] + [x for x in f.breakpoints if a < x < b] + [b]
    signs = [s for s in ((f(x) > level) - (f(x) < level) for x in pts) if s]
    return sum(1 for p, q in zip(signs, signs[1:]) if p != q)


def separation_certificate(f: Pwl1D, L: int, regions: int | None = None) -> SeparationCertificate:
    """Exact count-and-integrate certificate that f stays far from the depth-L^2 gadget.

    I_i = ((i - 1/2)/n, (i + 1/2)/n), i = 1..n-1, n = 3^(L^2).  I_i is good when
    f - 1/2 takes the (nonzero) sign of gadget(i/n) - 1/2 somewhere in I_i; every
    other interval contributes at least 1/(4n) to the L1 distance.  ``regions``
    is the region budget k of the candidate class (default: f's regions in [0, 1]).
    """
    if not isinstance(f, Pwl1D):
        raise TypeError("expects a Pwl1D")
    n = 3 ** (L * L)
    g = gadget_pwl(L)
    own = regions_in_unit_interval(f)
    k = own if regions is None else regions
    if k < own:
        raise ValueError(f"region budget {k} is below the candidate's {own} regions in [0, 1]")
    good = []
    for i in range(1, n):
        lo, hi = _range_on(f, Fraction(2 * i - 1, 2 * n), Fraction(2 * i + 1, 2 * n))
        good.append(hi > HALF if i % 2 else lo < HALF)
    non_good = good.count(False)
    pairs = sum(1 for p, q in zip(good, good[1:]) if p and q)
    crossings = _sign_changes(f, F0, F1, HALF)
    bound = certificate_bound(L, k)
    measured = exact_l1_distance_1d(f, g, (F0, F1))
    cert = SeparationCertificate(L, n, k, non_good, bound, measured, pairs, crossings)
    if not pairs <= crossings <= own:
        raise CertificateFailure(f"counting chain broken: pairs {pairs}, crossings {crossings}, regions {own}")
    if 2 * non_good < n - k - 2:
        raise CertificateFailure(f"{non_good} non-good intervals < (n - k - 2)/2")
    if measured < non_good * Fraction(1, 4 * n):
        raise CertificateFailure("L1 distance below the non-good interval contribution")
    if not cert.holds:
        raise CertificateFailure(f"measured {measured} < bound {bound}")
    return cert


def random_candidate(rng: random.Random, max_regions: int = 20, den: int = 1000) -> Pwl1D:
    """Random continuous PWL with 1..max_regions pieces (breakpoints in (0, 1), values in [-1/2, 3/2])."""
    k = rng.randint(1, max_regions)
    xs = sorted({Fraction(rng.randint(1, den - 1), den) for _ in range(k - 1)})
    ys = [Fraction(rng.randint(-den // 2, 3 * den // 2), den) for _ in xs]
    if not xs:
        return Pwl1D.affine(Fraction(rng.randint(-den, den), den), Fraction(rng.randint(0, den), den))
    sl = [Fraction(rng.randint(-3 * den, 3 * den), den) for _ in range(2)]
    return Pwl1D.from_knots(xs, ys, sl[0], sl[1])


def _float_l1(d):
    """Integral of |d| over cells of a uniform grid; d holds endpoint values (..., cells + 1)."""
    p, q = d[..., :-1], d[..., 1:]
    same = p * q >= 0
    with np.errstate(divide="ignore", invalid="ignore"):
        cross = (p * p + q * q) / (2 * np.abs(p - q))
    return np.where(same, np.abs(p + q) / 2, cross).sum(axis=-1)


def grid_oracle(L: int = 2, knot_den: int = 6, levels: int = 5, tol: float = 1e-9):
    """Brute-force minimiser of the exact L1 distance to the gadget over 4-region PWLs.

    Candidates: 3 breakpoints on the grid j/knot_den, values at 0, the breakpoints
    and 1 on {0, 1/(levels-1), ..., 1}.  All candidates are screened in binary64
    on a common grid where both functions are affine; every candidate within
    ``tol`` of the screened minimum is then re-integrated exactly.
    Returns (best f, exact distance, number of candidates).
    """
    if knot_den < 4 or levels < 2:
        raise ValueError("need knot_den >= 4 (three interior knots) and levels >= 2")
    g = gadget_pwl(L)
    n = 3 ** (L * L)
    cells = n * knot_den // math.gcd(n, knot_den)
    grid = np.arange(cells + 1) / cells
    gv = np.array([float(g(Fraction(i, cells))) for i in range(cells + 1)])
    vals = [Fraction(i, levels - 1) for i in range(levels)]
    knots = [Fraction(j, knot_den) for j in range(1, knot_den)]
    cands = [(xs, ys) for xs in itertools.combinations(knots, 3) for ys in itertools.product(vals, repeat=5)]
    fv = np.array([np.interp(grid, [0.0, *map(float, xs), 1.0], list(map(float, ys))) for xs, ys in cands])
    dist = _float_l1(fv - gv) / cells
    near = np.flatnonzero(dist <= dist.min() + tol)
    best, best_d = None, None
    for i in near:
        xs, ys = cands[i]
        f = Pwl1D.from_knots([F0, *xs, F1], ys, 0, 0)
        d = exact_l1_distance_1d(f, g, (F0, F1))
        if best_d is None or d < best_d:
            best, best_d = f, d
    return best, best_d, len(cands)


# --- depth efficiency -------------------------------------------------------------

def _pwl_complex_1d(f: Pwl1D, bbox) -> PwlSimplicial:
    a, b = to_fraction(bbox[0]), to_fraction(bbox[1])
    if f.slopes[0] != 0 or f.slopes[-1] != 0 or f(a) != 0 or f(b) != 0 or \
            any(not a <= x <= b for x in f.breakpoints):
        raise ValueError("function is not compactly supported within the box")
    xs = [a] + [x for x in f.breakpoints if a < x < b] + [b]
    return PwlSimplicial(1, [(x,) for x in xs], [(i, i + 1) for i in range(len(xs) - 1)], [f(x) for x in xs])


def _on_segment(p, q, r):
    """r strictly inside segment pq (exact)."""
    cross = (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
    if cross != 0:
        return False
    dot = (r[0] - p[0]) * (q[0] - p[0]) + (r[1] - p[1]) * (q[1] - p[1])
    return 0 < dot < (q[0] - p[0]) ** 2 + (q[1] - p[1]) ** 2


def cells_complex_2d(net: Network, bbox) -> PwlSimplicial:
    """Conforming triangulation of the cell decomposition: every cell is fanned from its
    centroid after inserting the vertices of neighbouring cells that lie on its edges."""
    x0, y0, x1, y1 = (to_fraction(v) for v in bbox)
    cells = decompose_cells(net, (x0, y0, x1, y1))
    allpts = sorted({p for c in cells for p in c.polygon})
    index = {}
    verts, vals, tris = [], [], []

    def vid(p, val):
        if p not in index:
            index[p] = len(verts)
            verts.append(p)
            vals.append(val)
        return index[p]

    for c in cells:
        g = c.map[0]
        val = lambda p: g[0] * p[0] + g[1] * p[1] + g[2]
        ring = []
        poly = c.polygon
        for i in range(len(poly)):
            p, q = poly[i], poly[(i + 1) % len(poly)]
            ring.append(p)
            inner = [r for r in allpts if _on_segment(p, q, r)]
            inner.sort(key=lambda r: (r[0] - p[0]) ** 2 + (r[1] - p[1]) ** 2)
            ring.extend(inner)
        ctr = centroid(poly)
        ci = vid(ctr, val(ctr))
        ids = [vid(p, val(p)) for p in ring]
        for i in range(len(ids)):
            tris.append((ci, ids[i], ids[(i + 1) % len(ids)]))
    boundary = [i for i, p in enumerate(verts) if p[0] in (x0, x1) or p[1] in (y0, y1)]
    if any(vals[i] != 0 for i in boundary):
        raise ValueError("function is not compactly supported within the box (nonzero on its boundary)")
    return PwlSimplicial(2, verts, tris, vals, compact_support=True)


@dataclass
class PipelineResult:
    network: Network
    complex: PwlSimplicial
    input_regions: int
    region_bound: int
    probes: int


def depth_efficiency_pipeline(net: Network, bbox, probes: int = 1000, seed: int = 0) -> PipelineResult:
    """Re-express a compactly supported shallow ReLU net as a width 2 n0 + 6 deep net."""
    if net.activation != "relu" or net.mode != RATIONAL:
        raise ModeError("the pipeline needs a rational relu network")
    if net.n_out != 1:
        raise ValueError("expects a scalar output")
    n0 = net.n_in
    if n0 == 1:
        f = network_to_pwl1d(net)
        cx = _pwl_complex_1d(f, bbox)
        regions = pwl1d_region_report(f).regions
        lo, hi = to_fraction(bbox[0]), to_fraction(bbox[1])
    elif n0 == 2:
        cx = cells_complex_2d(net, bbox)
        regions = cell_decomposition_2d(net, tuple(to_fraction(v) for v in bbox)).regions
        lo, hi = None, None
    else:
        raise ValueError("the pipeline supports n0 <= 2")
    out = compile_simplicial(cx)
    N = max(net.design[1:-1], default=1)
    bound = depth_efficiency_bound(N, max(net.depth, 1), n0)
    if regions > bound:
        raise CertificateFailure(f"{regions} regions exceed the bound {bound}")
    pts = list(cx.vertices)
    pts += [tuple(sum(c) / (n0 + 1) for c in zip(*[cx.vertices[i] for i in s])) for s in cx.simplices]
    if n0 == 1:
        span = hi - lo
        pts += [(lo - span / 4 + 3 * span / 2 * Fraction(random.Random(seed + i).randint(0, 997), 997),)
                for i in range(probes)]
    else:
        bx = [to_fraction(v) for v in bbox]
        rng = random.Random(seed)
        pts += [(bx[0] + (bx[2] - bx[0]) * Fraction(rng.randint(0, 997), 997),
                 bx[1] + (bx[3] - bx[1]) * Fraction(rng.randint(0, 997), 997)) for _ in range(probes)]
    for p in pts:
        want = eval_network(net, list(p))[0]
        got = eval_network(out, list(p))[0]
        if want != got:
            raise ReconstructionMismatch(None, p, want, got)
    return PipelineResult(out, cx, regions, bound, len(pts))


# --- Sobolev rate ---------------------------------------------------------------------

# 7-point degree-5 rule on the reference triangle: (barycentric coordinates, weight)
_A1, _B1 = 0.059715871789770, 0.470142064105115
_A2, _B2 = 0.797426985353087, 0.101286507323456
_W0, _W1, _W2 = 0.225, 0.132394152788506, 0.125939180544827
QUAD7 = ([((1 / 3, 1 / 3, 1 / 3), _W0)]
         + [(p, _W1) for p in ((_A1, _B1, _B1), (_B1, _A1, _B1), (_B1, _B1, _A1))]
         + [(p, _W2) for p in ((_A2, _B2, _B2), (_B2, _A2, _B2), (_B2, _B2, _A2))])


def bump2d(p):
    """256 (x(1-x) y(1-y))^2: C^1 with Lipschitz gradient once extended by 0, peak 1."""
    x, y = p
    return 256 * (x * (1 - x) * y * (1 - y)) ** 2


def bump2d_grad(p):
    x, y = p
    u, v = x * (1 - x), y * (1 - y)
    return (512 * u * v * v * (1 - 2 * x), 512 * u * u * v * (1 - 2 * y))


TARGETS = {"bump2d": (bump2d, bump2d_grad)}


def w11_error(cx: PwlSimplicial, f, grad):
    """(integral |f - g|, integral |grad f - grad g|) over the complex, 7-point rule per triangle."""
    l1 = d1 = 0.0
    for s in cx.simplices:
        P = np.array([[float(c) for c in cx.vertices[i]] for i in s])
        v = np.array([float(cx.values[i]) for i in s])
        J = np.array([P[1] - P[0], P[2] - P[0]]).T
        area = abs(np.linalg.det(J)) / 2
        gg = np.linalg.solve(J.T, v[1:] - v[0])
        for bary, w in QUAD7:
            x = np.asarray(bary) @ P
            gval = float(np.asarray(bary) @ v)
            l1 += w * area * abs(f(tuple(x)) - gval)
            gf = np.asarray(grad(tuple(x)), float)
            d1 += w * area * float(np.hypot(*(gf - gg)))
    return l1, d1


@dataclass
class SobolevReport:
    target: str
    resolutions: list
    l1_errors: list
    grad_errors: list
    depths: list
    widths: list
    order: float = field(default=float("nan"))

    @property
    def errors(self):
        return [a + b for a, b in zip(self.l1_errors, self.grad_errors)]

    @property
    def ratios(self):
        e = self.errors
        return [p / q if q else float("inf") for p, q in zip(e, e[1:])]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["target", "r", "l1_error", "grad_error", "w11_error", "depth", "width", "fitted_order"])
        for i, r in enumerate(self.resolutions):
            w.writerow([self.target, r, f"{self.l1_errors[i]:.12g}", f"{self.grad_errors[i]:.12g}",
                        f"{self.errors[i]:.12g}", self.depths[i], self.widths[i], f"{self.order:.6g}"])
        return buf.getvalue()


def sobolev_rate_experiment(f="bump2d", resolutions=(4, 8, 16), grad=None, compile=True, name=None):
    """Kuhn interpolants of f at each resolution, compiled to ReLU nets; W^{1,1} errors and fitted order."""
    if isinstance(f, str):
        name = name or f
        f, grad = TARGETS[f]
    if grad is None:
        raise ValueError("an exact gradient is required")
    rep = SobolevReport(name or getattr(f, "__name__", "f"), list(resolutions), [], [], [], [])
    for r in resolutions:
        cx = kuhn_grid_interpolant(lambda p: f(p), 2, r)
        if not cx.compact_support:
            raise ValueError("target does not vanish on the boundary of the unit square")
        l1, d1 = w11_error(cx, lambda p: float(f(p)), grad)
        rep.l1_errors.append(l1)
        rep.grad_errors.append(d1)
        if compile:
            net = compile_simplicial(cx)
            rep.depths.append(net.depth)
            rep.widths.append(net.width)
        else:
            rep.depths.append(None)
            rep.widths.append(None)
    e = rep.errors
    if len(e) >= 2 and all(v > 0 for v in e):
        slope = np.polyfit(np.log(np.asarray(resolutions, float)), np.log(e), 1)[0]
        rep.order = float(-slope)
    return rep
