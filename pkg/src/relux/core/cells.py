"""Exact linear-region decomposition of two-input ReLU networks.

The bounding box is cut by the first layer's neuron lines; on every cell the
following layer is affine, so each of its neurons contributes one more line
per cell.  After the last layer, edge-adjacent cells carrying the same affine
output map are merged with a union-find.  All arithmetic is rational.
"""
from __future__ import annotations

import os
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction

from .network import DimensionError, Network
from .pwl import RegionReport
from .scalars import RATIONAL, ModeError, to_fraction

F0, F1 = Fraction(0), Fraction(1)


class CellBudgetExceeded(RuntimeError):
    """The decomposition grew beyond RELUX_MAX_CELLS cells."""


def max_cells() -> int:
    return int(float(os.environ.get("RELUX_MAX_CELLS", "1e6")))


@dataclass(frozen=True)
class Cell2D:
    polygon: tuple            # counterclockwise vertices
    map: tuple                # per output: (gx, gy, offset)
    activation_pattern: tuple  # per hidden layer: tuple of bools

    def area(self):
        return polygon_area(self.polygon)


def polygon_area(poly):
    s = F0
    n = len(poly)
    for i in range(n):
        (x0, y0), (x1, y1) = poly[i], poly[(i + 1) % n]
        s += x0 * y1 - x1 * y0
    return s / 2


def centroid(poly):
    """Vertex average; interior for a non-degenerate convex polygon."""
    n = len(poly)
    return (sum((p[0] for p in poly), F0) / n, sum((p[1] for p in poly), F0) / n)


def _eval(m, p):
    return m[0] * p[0] + m[1] * p[1] + m[2]


def split_polygon(poly, m):
    """Split a convex polygon by the line m(x, y) = 0.

    Returns (positive part, negative part); either may be None.
    """
    vals = [_eval(m, p) for p in poly]
    if all(v >= 0 for v in vals):
        return (poly if any(v > 0 for v in vals) else None), None
    if all(v <= 0 for v in vals):
        return None, poly
    pos, neg = [], []
    n = len(poly)
    for i in range(n):
        p, q = poly[i], poly[(i + 1) % n]
        vp, vq = vals[i], vals[(i + 1) % n]
        if vp >= 0:
            pos.append(p)
        if vp <= 0:
            neg.append(p)
        if (vp > 0 > vq) or (vp < 0 < vq):
            t = vp / (vp - vq)
            r = (p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))
            pos.append(r)
            neg.append(r)
    return tuple(pos), tuple(neg)


def _line_key(p, q):
    """Normalised supporting line a*x + b*y = c of segment pq."""
    a, b = q[1] - p[1], p[0] - q[0]
    if a != 0:
        a, b = F1, b / a
    else:
        a, b = F0, F1
    return (a, b, a * p[0] + b * p[1])


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, i):
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i, j):
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            self.parent[max(ri, rj)] = min(ri, rj)


def adjacent_pairs(polys):
    """Pairs (i, j) of polygons sharing a boundary segment of positive length."""
    groups = defaultdict(list)
    for ci, poly in enumerate(polys):
        n = len(poly)
        for k in range(n):
            p, q = poly[k], poly[(k + 1) % n]
            key = _line_key(p, q)
            a, b, _ = key
            t0, t1 = -b * p[0] + a * p[1], -b * q[0] + a * q[1]
            if t0 > t1:
                t0, t1 = t1, t0
            groups[key].append((t0, t1, ci))
    pairs = set()
    for segs in groups.values():
        segs.sort()
        active = []
        for t0, t1, ci in segs:
            active = [s for s in active if s[1] > t0]
            for s in active:
                if s[2] != ci:
                    pairs.add((min(s[2], ci), max(s[2], ci)))
            active.append((t0, t1, ci))
    return pairs


def _check_bbox(bbox):
    x0, y0, x1, y1 = (to_fraction(v) for v in bbox)
    if not (x0 < x1 and y0 < y1):
        raise ValueError(f"degenerate bounding box {bbox}")
    return x0, y0, x1, y1


def decompose_cells(net: Network, bbox):
    """Unmerged cells of ``net`` inside ``bbox`` (list of Cell2D)."""
    if net.activation != "relu" or net.mode != RATIONAL:
        raise ModeError("cell decomposition needs a rational relu network")
    if net.n_in != 2:
        raise DimensionError(f"expected n_0 = 2, got {net.n_in}")
    x0, y0, x1, y1 = _check_bbox(bbox)
    budget = max_cells()
    box = ((x0, y0), (x1, y0), (x1, y1), (x0, y1))
    # each cell: (polygon, maps of current layer outputs, pattern so far)
    cells = [(box, [(F1, F0, F0), (F0, F1, F0)], ())]
    for li, layer in enumerate(net.layers):
        nxt = []
        for poly, maps, pat in cells:
            pre = []
            for row, b in zip(layer.weights, layer.bias):
                gx, gy, c = F0, F0, b
                for w, m in zip(row, maps):
                    if w:
                        gx += w * m[0]
                        gy += w * m[1]
                        c += w * m[2]
                pre.append((gx, gy, c))
            if li == len(net.layers) - 1:
                nxt.append((poly, pre, pat))
                continue
            pieces = [poly]
            for m in pre:
                if m[0] == 0 and m[1] == 0:
                    continue
                out = []
                for pc in pieces:
                    pp, nn = split_polygon(pc, m)
                    if pp is not None:
                        out.append(pp)
                    if nn is not None:
                        out.append(nn)
                pieces = out
            for pc in pieces:
                c = centroid(pc)
                active = tuple(_eval(m, c) > 0 for m in pre)
                post = [m if a else (F0, F0, F0) for m, a in zip(pre, active)]
                nxt.append((pc, post, pat + (active,)))
            if len(nxt) > budget:
                raise CellBudgetExceeded(f"more than {budget} cells after layer {li + 1}")
        cells = nxt
    return [Cell2D(tuple(p), tuple(m), pat) for p, m, pat in cells]


def merge_cells(cells):
    """Union-find over edge-adjacent cells with identical output maps.

    Returns the list of components, each a list of cell indices.
    """
    uf = _UnionFind(len(cells))
    for i, j in adjacent_pairs([c.polygon for c in cells]):
        if cells[i].map == cells[j].map:
            uf.union(i, j)
    comps = defaultdict(list)
    for i in range(len(cells)):
        comps[uf.find(i)].append(i)
    return list(comps.values())


def cell_decomposition_2d(net: Network, bbox=None) -> RegionReport:
    """Exact region count of a two-input relu network within ``bbox``.

    Without a bbox the box [-B, B]^2 is doubled from B = 64 until the count is
    unchanged by one doubling (a heuristic for "all vertices inside").
    """
    if bbox is None:
        b = 64
        prev = _report(net, (-b, -b, b, b))
        while True:
            b *= 2
            cur = _report(net, (-b, -b, b, b))
            if cur.regions == prev.regions:
                return cur
            prev = cur
    return _report(net, bbox)


def _report(net, bbox):
    cells = decompose_cells(net, bbox)
    comps = merge_cells(cells)
    nonconst = 0
    for comp in comps:
        m = cells[comp[0]].map
        if any(g[0] != 0 or g[1] != 0 for g in m):
            nonconst += 1
    return RegionReport(regions=len(comps), nonconstant_regions=nonconst, monotone_regions=None,
                        cells=cells, method="exact-2d-cells")
