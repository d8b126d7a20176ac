"""Output-dimension reduction and region counting by input dimension."""
from __future__ import annotations

import random
from fractions import Fraction

from .cells import cell_decomposition_2d
from .network import AffineLayer, DimensionError, Network
from .pwl import (RegionReport, _LayerFunctions, count_regions_1d, network_to_pwl1d,
                  pwl1d_region_report)
from .scalars import RATIONAL, ModeError

Z_BOUND = 10 ** 6
MAX_RETRIES = 16


class ReductionFailed(RuntimeError):
    def __init__(self, before, after, attempts):
        super().__init__(f"region count not preserved after {attempts} attempts: "
                         f"{before} regions before, {after} after the last projection")
        self.before, self.after, self.attempts = before, after, attempts


def count_regions(net: Network, bbox=None) -> int:
    """Exact region count for n_0 in {1, 2} (vector outputs allowed)."""
    if net.n_in == 1:
        return count_regions_1d(net)
    if net.n_in == 2:
        return cell_decomposition_2d(net, bbox).regions
    raise DimensionError("exact counting is available for n_0 <= 2 only")


def region_report(net: Network, bbox=None, seed=0, lines=64) -> RegionReport:
    """Region report for any input dimension; n_0 >= 3 gives a sampled lower bound."""
    if net.n_in == 1 and net.n_out == 1:
        return pwl1d_region_report(network_to_pwl1d(net))
    if net.n_in <= 2:
        if net.n_in == 1:
            r = count_regions_1d(net)
            return RegionReport(r, r, None, None, "exact-1d")
        return cell_decomposition_2d(net, bbox)
    return sampled_region_lower_bound(net, seed=seed, lines=lines)


def project_output(net: Network, z) -> Network:
    """Scalar network x -> z . net(x)."""
    last = net.layers[-1]
    z = [Fraction(v) for v in z]
    if len(z) != last.rows:
        raise DimensionError("z must match the output dimension")
    w = [[sum((z[i] * last.weights[i][j] for i in range(last.rows)), Fraction(0)) for j in range(last.cols)]]
    b = [sum((z[i] * last.bias[i] for i in range(last.rows)), Fraction(0))]
    return Network(net.layers[:-1] + (AffineLayer(w, b),), net.activation, net.mode)


def reduce_output_dim(net: Network, seed=None, candidates=None, bbox=None) -> Network:
    """Project to one output with a random integer z and verify the region count.

    ``candidates`` (optional) are tried before random draws; each attempt,
    candidate or random, counts towards the retry budget.
    """
    if net.mode != RATIONAL:
        raise ModeError("output reduction is verified exactly and needs rational mode")
    before = count_regions(net, bbox)
    rng = random.Random(seed)
    queue = list(candidates or [])
    after = None
    for attempt in range(1, MAX_RETRIES + 1):
        z = queue.pop(0) if queue else [rng.randint(-Z_BOUND, Z_BOUND) for _ in range(net.n_out)]
        red = project_output(net, z)
        after = count_regions(red, bbox)
        if after == before:
            return red
    raise ReductionFailed(before, after, MAX_RETRIES)


def sampled_region_lower_bound(net: Network, seed=0, lines=64, radius=8) -> RegionReport:
    """Lower bound on the region count for any n_0 from exact counts on random lines.

    Each line x(t) = p + t*u with rational p, u is restricted exactly; the
    full affine map (Jacobian and offset) of every piece is computed at the
    piece midpoint, and distinct maps are counted over all lines.  Distinct
    maps belong to distinct regions, so the count never exceeds the truth.
    """
    if net.mode != RATIONAL or net.activation != "relu":
        raise ModeError("sampling restricts exactly and needs a rational relu network")
    rng = random.Random(seed)
    n0 = net.n_in
    maps = set()
    nonconst = set()
    for _ in range(lines):
        p = [Fraction(rng.randint(-radius * 64, radius * 64), 64) for _ in range(n0)]
        u = [Fraction(rng.randint(-64, 64), 64) for _ in range(n0)]
        if not any(u):
            u[0] = Fraction(1)
        first = net.layers[0]
        w = [[sum((r[j] * u[j] for j in range(n0)), Fraction(0))] for r in first.weights]
        b = [bb + sum((r[j] * p[j] for j in range(n0)), Fraction(0)) for r, bb in zip(first.weights, first.bias)]
        line_net = Network((AffineLayer(w, b),) + net.layers[1:], "relu", RATIONAL)
        lf = _breakpoints_of(line_net)
        ts = _midpoints(lf)
        for t in ts:
            x = [pi + t * ui for pi, ui in zip(p, u)]
            key = _local_map(net, x)
            maps.add(key)
            if any(any(v != 0 for v in row) for row in key[0]):
                nonconst.add(key)
    return RegionReport(regions=len(maps), nonconstant_regions=len(nonconst), monotone_regions=None,
                        cells=None, method="sampled-lower-bound")


def _breakpoints_of(line_net):
    from .pwl import propagate_1d
    return propagate_1d(line_net).xs


def _midpoints(xs):
    if len(xs) == 1:
        return [xs[0] - 1, xs[0] + 1]
    out = [xs[0] - 1]
    out += [(a + b) / 2 for a, b in zip(xs, xs[1:])]
    out.append(xs[-1] + 1)
    return out


def _local_map(net: Network, x):
    """Jacobian and offset of the network at a point interior to a region."""
    n0 = len(x)
    jac = [[Fraction(int(i == j)) for j in range(n0)] for i in range(n0)]
    val = list(x)
    for li, layer in enumerate(net.layers):
        nj, nv = [], []
        for r, b in zip(layer.weights, layer.bias):
            nj.append([sum((r[k] * jac[k][j] for k in range(len(r)) if r[k]), Fraction(0)) for j in range(n0)])
            nv.append(b + sum((r[k] * val[k] for k in range(len(r)) if r[k]), Fraction(0)))
        if li < len(net.layers) - 1:
            for i, v in enumerate(nv):
                if v <= 0:
                    nv[i] = Fraction(0)
                    nj[i] = [Fraction(0)] * n0
        jac, val = nj, nv
    offset = tuple(v - sum((row[j] * x[j] for j in range(n0)), Fraction(0)) for v, row in zip(val, jac))
    return tuple(tuple(r) for r in jac), offset
