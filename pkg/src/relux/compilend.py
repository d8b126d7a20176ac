"""Compilation of simplicial piecewise-affine functions into ReLU networks.

Every vertex p contributes f(p) times its hat function.  Hat functions are
built from min-chains of affine functionals clipped at zero; the network
keeps 2*n0 neurons storing the input, two pairs for running sums and two
computation neurons in every layer (width 2*n0 + 6).
"""
from __future__ import annotations

import functools
import itertools
import json
import random
from dataclasses import dataclass
from fractions import Fraction
from math import factorial

from .core.builder import NetBuilder
from .core.network import Network
from .core.scalars import format_rational, parse_rational, to_fraction

F0, F1 = Fraction(0), Fraction(1)


class ReconstructionMismatch(RuntimeError):
    def __init__(self, vertex, point, expected, got):
        super().__init__(f"block for vertex {vertex} disagrees with its hat function at {point}: "
                         f"expected {expected}, got {got}")
        self.vertex, self.point, self.expected, self.got = vertex, point, expected, got


class DegenerateSimplex(ValueError):
    pass


# --- exact linear algebra --------------------------------------------------

def solve_exact(A, b):
    """Solve A x = b over the rationals (Gaussian elimination with pivoting)."""
    n = len(A)
    M = [[to_fraction(v) for v in row] + [to_fraction(bi)] for row, bi in zip(A, b)]
    for c in range(n):
        piv = next((r for r in range(c, n) if M[r][c] != 0), None)
        if piv is None:
            raise DegenerateSimplex("singular system")
        M[c], M[piv] = M[piv], M[c]
        inv = 1 / M[c][c]
        for r in range(n):
            if r != c and M[r][c] != 0:
                f = M[r][c] * inv
                M[r] = [x - f * y for x, y in zip(M[r], M[c])]
    return [M[i][n] / M[i][i] for i in range(n)]


def barycentric_functionals(simplex):
    """Affine maps (grad, offset) with lambda_i(x) = grad . x + offset."""
    pts = [tuple(to_fraction(v) for v in p) for p in simplex]
    d = len(pts) - 1
    if any(len(p) != d for p in pts):
        raise DegenerateSimplex("a d-simplex needs d+1 points in R^d")
    # lambda_i(x) = grad_i . x + c_i with lambda_i(p_j) = delta_ij
    A = [list(p) + [F1] for p in pts]
    out = []
    for i in range(d + 1):
        e = [F1 if j == i else F0 for j in range(d + 1)]
        sol = solve_exact(A, e)
        out.append((tuple(sol[:d]), sol[d]))
    return out


def _aff(m, x):
    return sum((g * xi for g, xi in zip(m[0], x)), F0) + m[1]


def barycentric_decompose(simplex, f):
    """Split an affine f into f_i = lambda_i * f(x_i); f_i vanishes on the face opposite x_i.

    ``f`` is a callable or an affine map (grad, offset).  Returns a list of
    affine maps (grad, offset).
    """
    lam = barycentric_functionals(simplex)
    fv = [f(p) if callable(f) else _aff(f, p) for p in simplex]
    return [(tuple(g * v for g in gr), c * v) for (gr, c), v in zip(lam, fv)]


def simplex_volume(simplex):
    pts = [tuple(to_fraction(v) for v in p) for p in simplex]
    d = len(pts) - 1
    M = [[pts[i + 1][j] - pts[0][j] for j in range(d)] for i in range(d)]
    det = _det(M)
    return abs(det) / factorial(d)


def _det(M):
    M = [row[:] for row in M]
    n = len(M)
    det = F1
    for c in range(n):
        piv = next((r for r in range(c, n) if M[r][c] != 0), None)
        if piv is None:
            return F0
        if piv != c:
            M[c], M[piv] = M[piv], M[c]
            det = -det
        det *= M[c][c]
        for r in range(c + 1, n):
            f = M[r][c] / M[c][c]
            M[r] = [x - f * y for x, y in zip(M[r], M[c])]
    return det


# --- simplicial complexes ------------------------------------------------

@dataclass
class PwlSimplicial:
    dim: int
    vertices: list
    simplices: list
    values: list
    compact_support: bool = True

    def __post_init__(self):
        self.vertices = [tuple(to_fraction(v) for v in p) for p in self.vertices]
        self.simplices = [tuple(s) for s in self.simplices]
        self.values = [to_fraction(v) for v in self.values]
        if len(self.values) != len(self.vertices):
            raise ValueError("one value per vertex")
        for s in self.simplices:
            if len(s) != self.dim + 1:
                raise ValueError(f"simplex {s} does not have dim+1 vertices")
            if simplex_volume([self.vertices[i] for i in s]) == 0:
                raise DegenerateSimplex(f"simplex {s} is degenerate")
        self._lam = [barycentric_functionals([self.vertices[i] for i in s]) for s in self.simplices]
        if self.compact_support:
            bad = [i for i in self.boundary_vertices() if self.values[i] != 0]
            if bad:
                raise ValueError(f"compact support claimed but boundary vertices {bad[:5]} are nonzero")

    # faces of dimension dim-1 with the simplices containing them
    def facets(self):
        out = {}
        for si, s in enumerate(self.simplices):
            for face in itertools.combinations(sorted(s), self.dim):
                out.setdefault(face, []).append(si)
        return out

    def boundary_vertices(self):
        b = set()
        for face, owners in self.facets().items():
            if len(owners) == 1:
                b.update(face)
        return sorted(b)

    def star(self, p):
        return [si for si, s in enumerate(self.simplices) if p in s]

    def lam(self, si, x):
        """Barycentric coordinates of x in simplex si (ordered like the simplex)."""
        return [_aff(m, x) for m in self._lam[si]]

    def locate(self, x):
        x = tuple(to_fraction(v) for v in x)
        for si in range(len(self.simplices)):
            l = self.lam(si, x)
            if all(v >= 0 for v in l):
                return si, l
        return None, None

    def __call__(self, x):
        si, l = self.locate(x)
        if si is None:
            return F0
        return sum((li * self.values[v] for li, v in zip(l, self.simplices[si])), F0)

    def hat(self, p, x):
        x = tuple(to_fraction(v) for v in x)
        for si in self.star(p):
            l = self.lam(si, x)
            if all(v >= 0 for v in l):
                return l[self.simplices[si].index(p)]
        return F0

    def check_conforming(self):
        """Exhaustive check that simplices meet only in shared faces (n0 <= 2)."""
        facets = self.facets()
        if any(len(o) > 2 for o in facets.values()):
            raise ValueError("a facet is shared by more than two simplices")
        if self.dim > 2:
            return True
        V = self.vertices
        for si, s in enumerate(self.simplices):
            for vi in range(len(V)):
                if vi in s:
                    continue
                l = self.lam(si, V[vi])
                if all(v >= 0 for v in l):
                    raise ValueError(f"vertex {vi} lies in simplex {s} without being one of its vertices")
        for a, b in itertools.combinations(range(len(self.simplices)), 2):
            if _overlap(self, a, b):
                raise ValueError(f"simplices {self.simplices[a]} and {self.simplices[b]} overlap")
        return True

    def to_json(self):
        return {"dim": self.dim,
                "vertices": [[format_rational(c) for c in p] for p in self.vertices],
                "simplices": [list(s) for s in self.simplices],
                "values": [format_rational(v) for v in self.values],
                "compact_support": self.compact_support}

    @classmethod
    def from_json(cls, d):
        return cls(d["dim"], [[parse_rational(c) if isinstance(c, str) else c for c in p] for p in d["vertices"]],
                   d["simplices"], [parse_rational(v) if isinstance(v, str) else v for v in d["values"]],
                   bool(d.get("compact_support", True)))


def _overlap(cx, a, b):
    """Interiors of two simplices intersect (separating-axis test, n0 <= 2)."""
    pa = [cx.vertices[i] for i in cx.simplices[a]]
    pb = [cx.vertices[i] for i in cx.simplices[b]]
    axes = [g for g, _ in cx._lam[a]] + [g for g, _ in cx._lam[b]]
    for g in axes:
        ra = [sum((gi * xi for gi, xi in zip(g, p)), F0) for p in pa]
        rb = [sum((gi * xi for gi, xi in zip(g, p)), F0) for p in pb]
        if max(ra) <= min(rb) or max(rb) <= min(ra):
            return False
    return True


def load_pwl_simplicial(path) -> PwlSimplicial:
    with open(path) as fh:
        return PwlSimplicial.from_json(json.load(fh))


def kuhn_grid_interpolant(sampler, n0: int, r: int) -> PwlSimplicial:
    """Kuhn triangulation of [0,1]^n0 with r^n0 cubes and n0! simplices per cube.

    ``sampler`` maps a vertex (tuple of Fractions) to its value.
    """
    if r < 1:
        raise ValueError("resolution must be >= 1")
    index = {}
    vertices = []
    for idx in itertools.product(range(r + 1), repeat=n0):
        index[idx] = len(vertices)
        vertices.append(tuple(Fraction(i, r) for i in idx))
    simplices = []
    for cube in itertools.product(range(r), repeat=n0):
        for perm in itertools.permutations(range(n0)):
            cur = list(cube)
            s = [index[tuple(cur)]]
            for j in perm:
                cur[j] += 1
                s.append(index[tuple(cur)])
            simplices.append(tuple(s))
    values = [to_fraction(sampler(v)) for v in vertices]
    boundary_zero = all(values[i] == 0 for idx, i in index.items() if any(c in (0, r) for c in idx))
    return PwlSimplicial(n0, vertices, simplices, values, compact_support=boundary_zero)


# --- cone fragments ----------------------------------------------------------

@dataclass
class ConeSpec:
    apex: tuple
    face_normals: list
    interior_direction: tuple
    slope: Fraction

    def normalized(self):
        """Normals scaled so that a_i . v = 1."""
        v = [to_fraction(c) for c in self.interior_direction]
        out = []
        for a in self.face_normals:
            a = [to_fraction(c) for c in a]
            dot = sum((x * y for x, y in zip(a, v)), F0)
            if dot <= 0:
                raise ValueError(f"direction {tuple(v)} is not interior: a . v = {dot} for a = {tuple(a)}")
            out.append(tuple(c / dot for c in a))
        return out

    def functionals(self):
        """Affine maps a_i . (x - apex) as (grad, offset)."""
        apex = [to_fraction(c) for c in self.apex]
        return [(a, -sum((x * y for x, y in zip(a, apex)), F0)) for a in self.normalized()]

    def __call__(self, x):
        x = [to_fraction(c) for c in x]
        m = min(_aff(f, x) for f in self.functionals())
        return to_fraction(self.slope) * max(F0, m)


class _WideState:
    """Layer emitter with the fixed layout
    [x+ x- per coordinate | G+ G- | P+ P- | c1 c2].
    """

    def __init__(self, builder: NetBuilder, n0: int):
        self.b = builder
        self.n0 = n0
        self.x = builder.inputs()
        self.G = builder.zero()   # running total (only meaningful once a layer exists)
        self.P = builder.zero()   # running vertex partial sum
        self.width = 2 * n0 + 6

    def aff(self, m):
        """Affine functional (grad, offset) of x as an expression in the current frame."""
        return sum((g * xi for g, xi in zip(m[0], self.x) if g), self.b.constant(m[1]))

    def step(self, c1=None, c2=None, dG=0, dP=0, reset_P=False):
        b = self.b
        z = b.zero()
        G = self.G + dG
        P = (z if reset_P else self.P) + dP
        pre = []
        for xi in self.x:
            pre += [xi, -xi]
        pre += [G, -G, P, -P, c1 if c1 is not None else z, c2 if c2 is not None else z]
        out = b.layer(pre)
        n = 2 * self.n0
        self.x = [out[2 * i] - out[2 * i + 1] for i in range(self.n0)]
        self.G = out[n] - out[n + 1]
        self.P = out[n + 2] - out[n + 3]
        return out[n + 4], out[n + 5]


def _emit_min_clip(st: _WideState, functionals, scale, pending=None, reset_P=False):
    """Emit layers computing scale * max(0, min_i functionals_i(x)).

    Returns the expression (in the frame after the clip layer) that must be
    added to the chosen running sum, leaving the addition to the caller's
    next step (so consecutive blocks do not waste a layer).  ``pending`` is a
    pair (dG, dP) of increments owed from the previous block.
    """
    dG, dP = pending or (0, 0)
    m = st.aff(functionals[0])
    for f in functionals[1:]:
        r, _ = st.step(c1=st.aff(f) - m, dG=dG, dP=dP, reset_P=reset_P)
        dG = dP = 0
        reset_P = False
        m = st.aff(f) - r
    c, _ = st.step(c1=m, dG=dG, dP=dP, reset_P=reset_P)
    return scale * c


def lego_min_network(cone: ConeSpec) -> Network:
    """Stand-alone fragment computing s * max(0, min_i a_i . (x - apex)); depth k."""
    fs = cone.functionals()
    n0 = len(cone.interior_direction)
    b = NetBuilder(n0)
    st = _WideState(b, n0)
    out = _emit_min_clip(st, fs, to_fraction(cone.slope))
    return b.finish([out])


# --- vertex blocks -----------------------------------------------------------

def _star_info(cx: PwlSimplicial, p: int):
    star = cx.star(p)
    facets = cx.facets()
    interior = all(len(facets[f]) == 2 for si in star
                   for f in itertools.combinations(sorted(cx.simplices[si]), cx.dim) if p in f)
    link = sorted({v for si in star for v in cx.simplices[si] if v != p})
    lam_p = [cx._lam[si][cx.simplices[si].index(p)] for si in star]
    convex = interior and all(_aff(m, cx.vertices[q]) >= 0 for m in lam_p for q in link)
    return star, link, lam_p, interior, convex


def _probe_points(cx: PwlSimplicial, p: int, star, link):
    P = cx.vertices[p]
    pts = [P]
    for si in star:
        vs = [cx.vertices[i] for i in cx.simplices[si]]
        pts.append(tuple(sum(c) / len(vs) for c in zip(*vs)))
        for a, b in itertools.combinations(vs, 2):
            pts.append(tuple((x + y) / 2 for x, y in zip(a, b)))
    for q in link:
        Q = cx.vertices[q]
        pts.append(Q)
        pts.append(tuple(2 * x - y for x, y in zip(Q, P)))      # beyond the link vertex
        pts.append(tuple(2 * y - x for x, y in zip(Q, P)))      # reflected through p
    return pts


def _rays_2d(cx: PwlSimplicial, p: int, star):
    """Rays around p for the per-edge construction, subdivided until each
    cone spanned by a ray's two neighbours is convex.

    Returns a list of (direction w, hat slope sigma) in counterclockwise order.
    """
    P = cx.vertices[p]
    sectors = []  # (u, w, simplex index) with u -> w counterclockwise inside the simplex
    for si in star:
        others = [v for v in cx.simplices[si] if v != p]
        u = tuple(a - b for a, b in zip(cx.vertices[others[0]], P))
        w = tuple(a - b for a, b in zip(cx.vertices[others[1]], P))
        if u[0] * w[1] - u[1] * w[0] < 0:
            u, w = w, u
        sectors.append([u, w, si])

    # exact angular order: half-plane first, then the cross product
    def half(v):
        return 0 if (v[1] > 0 or (v[1] == 0 and v[0] > 0)) else 1

    def cmp(a, b):
        ha, hb = half(a), half(b)
        if ha != hb:
            return ha - hb
        c = a[0] * b[1] - a[1] * b[0]
        return -1 if c > 0 else (1 if c < 0 else 0)

    sectors.sort(key=functools.cmp_to_key(lambda s, t: cmp(s[0], t[0])))
    # split sectors until every ray's neighbour cone is convex
    def l1(v):
        n = abs(v[0]) + abs(v[1])
        return (v[0] / n, v[1] / n)

    def cross(a, b):
        return a[0] * b[1] - a[1] * b[0]

    while True:
        rays = [s[0] for s in sectors]
        n = len(rays)
        bad = [i for i in range(n) if cross(rays[i - 1], rays[(i + 1) % n]) <= 0]
        if not bad:
            break
        split = set()
        for i in bad:
            split.add((i - 1) % n)
            split.add(i)
        new = []
        for i, (u, w, si) in enumerate(sectors):
            if i in split:
                a, c = l1(u), l1(w)
                mid = (a[0] + c[0], a[1] + c[1])
                new.append([u, mid, si])
                new.append([mid, w, si])
            else:
                new.append([u, w, si])
        sectors = new
    out = []
    for u, _, si in sectors:
        m = cx._lam[si][cx.simplices[si].index(p)]
        sigma = F1 - _aff(m, tuple(a + b for a, b in zip(P, u)))
        out.append((u, sigma))
    return out


def _ray_cones(cx, p, rays):
    """Per-ray lego cones f_{p,r} = -sigma_r * max(0, min(a_-.y, a_+.y)), y = x - p."""
    P = cx.vertices[p]
    cones = []
    n = len(rays)
    for i, (w, sigma) in enumerate(rays):
        prev, nxt = rays[i - 1][0], rays[(i + 1) % n][0]
        # normals to the neighbouring rays, oriented towards w
        normals = []
        for q in (prev, nxt):
            a = (-q[1], q[0])
            if a[0] * w[0] + a[1] * w[1] < 0:
                a = (-a[0], -a[1])
            normals.append(a)
        cones.append(ConeSpec(P, normals, w, -sigma))
    return cones


@dataclass
class BlockPlan:
    vertex: int
    value: Fraction
    path: str                  # "convex" or "edges"
    functionals: list | None   # convex path: affine maps to take the min of
    cones: list | None         # edge path: per-ray ConeSpecs
    layers: int

    def evaluate(self, x):
        """Direct evaluation of the planned block (no network)."""
        x = tuple(to_fraction(v) for v in x)
        if self.path == "convex":
            return self.value * max(F0, min(_aff(m, x) for m in self.functionals))
        s = F1 + sum((c(x) for c in self.cones), F0)
        return self.value * max(F0, s)


def plan_vertex_block(cx: PwlSimplicial, p: int, validate=True, on_star=False) -> BlockPlan:
    """Choose and validate the construction of f_p = f(p) * hat_p.

    With ``on_star`` a boundary vertex is accepted when its star is convex at p;
    the block then equals f_p on the star only and is validated there.
    """
    val = cx.values[p]
    star, link, lam_p, interior, convex = _star_info(cx, p)
    boundary = not interior and val != 0
    if boundary:
        if not on_star:
            raise ValueError(f"vertex {p} lies on the complex boundary with nonzero value")
        convex = all(_aff(m, cx.vertices[q]) >= 0 for m in lam_p for q in link)
        if not convex:
            raise ValueError(f"boundary vertex {p} has a non-convex star")
    if val == 0:
        return BlockPlan(p, val, "zero", None, None, 0)
    if convex:
        plan = BlockPlan(p, val, "convex", lam_p, None, len(lam_p))
    elif cx.dim == 2:
        rays = _rays_2d(cx, p, star)
        cones = _ray_cones(cx, p, rays)
        plan = BlockPlan(p, val, "edges", None, cones, 2 * len(cones) + 1)
    else:
        raise ReconstructionMismatch(p, None, "convex star", "non-convex star in dimension >= 3")
    if validate:
        for x in _probe_points(cx, p, star, link):
            if boundary and not any(all(v >= 0 for v in cx.lam(si, x)) for si in star):
                continue
            want = val * cx.hat(p, x)
            got = plan.evaluate(x)
            if want != got:
                raise ReconstructionMismatch(p, x, want, got)
    return plan


def _emit_block(st: _WideState, plan: BlockPlan, pending):
    """Emit the layers of one vertex block; returns the increment owed to G."""
    if plan.path == "convex":
        return _emit_min_clip(st, plan.functionals, plan.value, pending=pending)
    dG, dP = pending[0], 0
    reset = True   # the partial sum restarts for every vertex
    for cone in plan.cones:
        dP = _emit_min_clip(st, cone.functionals(), to_fraction(cone.slope),
                            pending=(dG, dP), reset_P=reset)
        dG, reset = 0, False
    c, _ = st.step(c1=1 + st.P + dP)
    return plan.value * c


def compile_vertex_block(cx: PwlSimplicial, p: int) -> Network:
    """Stand-alone network (width 2*n0 + 6) computing f_p (on the star of p for a boundary vertex)."""
    plan = plan_vertex_block(cx, p, on_star=True)
    b = NetBuilder(cx.dim)
    st = _WideState(b, cx.dim)
    if plan.path == "zero":
        st.step()
        return b.finish([b.zero()])
    inc = _emit_block(st, plan, (0, 0))
    return b.finish([st.G + inc])


def depth_budget(cx: PwlSimplicial) -> int:
    """Sum over vertices with nonzero value of 1 + n0 * S_p."""
    return sum(1 + cx.dim * len(cx.star(p)) for p in range(len(cx.vertices)) if cx.values[p] != 0)


def compile_simplicial(cx: PwlSimplicial, validate=True) -> Network:
    """Width 2*n0 + 6 network computing the compactly supported function ``cx``."""
    if not cx.compact_support:
        raise ValueError("compile_simplicial needs a compactly supported function")
    b = NetBuilder(cx.dim)
    st = _WideState(b, cx.dim)
    owed = 0
    for p in range(len(cx.vertices)):
        plan = plan_vertex_block(cx, p, validate=validate)
        if plan.path == "zero":
            continue
        owed = _emit_block(st, plan, (owed, 0))
    if b.depth == 0:
        st.step()
        return b.finish([b.zero()])
    return b.finish([st.G + owed])


def random_probe_points(n0: int, count: int, seed=0, lo=-Fraction(1, 4), hi=Fraction(5, 4), den=997):
    rng = random.Random(seed)
    span = hi - lo
    return [tuple(lo + span * Fraction(rng.randint(0, den), den) for _ in range(n0)) for _ in range(count)]
