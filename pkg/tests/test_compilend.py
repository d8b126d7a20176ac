import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import exact_forward
from relux.compile1d import compile_width3
from relux.compilend import (ConeSpec, DegenerateSimplex, PwlSimplicial, ReconstructionMismatch,
                             barycentric_decompose, compile_simplicial, compile_vertex_block, depth_budget,
                             kuhn_grid_interpolant, lego_min_network, plan_vertex_block, random_probe_points)
from relux.core import Pwl1D, exact_l1_distance_1d, network_to_pwl1d

TRI = [(0, 0), (1, 0), (0, 1)]


def value(net, x):
    return exact_forward(net, x)[0][0]


def affine_value(m, x):
    return sum(g * v for g, v in zip(m[0], x)) + m[1]


def random_grid(r, seed, den=7):
    rng = random.Random(seed)

    def sampler(v):
        if any(c in (0, 1) for c in v):
            return 0
        return F(rng.randint(-den, den), rng.randint(1, den))
    return kuhn_grid_interpolant(sampler, 2, r)


def star_nonconvex():
    """Vertex 0 with a star-shaped but non-convex link (reflex at (1/2, 1/2))."""
    V = [(0, 0), (2, 0), (F(1, 2), F(1, 2)), (0, 2), (-1, 0), (0, -1)]
    S = [(0, 1, 2), (0, 2, 3), (0, 3, 4), (0, 4, 5), (0, 5, 1)]
    return PwlSimplicial(2, V, S, [3, 0, 0, 0, 0, 0])


class TestKuhn:
    def test_counts(self):
        cx = kuhn_grid_interpolant(lambda v: 0, 2, 2)
        assert len(cx.vertices) == 9 and len(cx.simplices) == 8
        assert cx.compact_support and all(v == 0 for v in cx.values)

    def test_unit_square(self):
        cx = kuhn_grid_interpolant(lambda v: 0, 2, 1)
        tris = {frozenset(cx.vertices[i] for i in s) for s in cx.simplices}
        assert tris == {frozenset({(0, 0), (1, 0), (1, 1)}), frozenset({(0, 0), (0, 1), (1, 1)})}

    @pytest.mark.parametrize("n0, r", [(1, 5), (2, 3), (3, 2)])
    def test_conforming_and_interpolating(self, n0, r):
        f = lambda v: sum((i + 1) * c * c for i, c in enumerate(v))
        cx = kuhn_grid_interpolant(f, n0, r)
        assert cx.check_conforming()
        assert len(cx.simplices) == r ** n0 * [1, 1, 2, 6][n0]
        for v in cx.vertices:
            assert cx(v) == f(v)

    def test_nonzero_boundary_is_not_compact(self):
        cx = kuhn_grid_interpolant(lambda v: 1, 2, 2)
        assert not cx.compact_support
        with pytest.raises(ValueError):
            compile_simplicial(cx)

    def test_json_roundtrip(self):
        cx = random_grid(3, 1)
        back = PwlSimplicial.from_json(cx.to_json())
        assert back.vertices == cx.vertices and back.values == cx.values and back.simplices == cx.simplices


class TestBarycentric:
    def test_partition_of_unity(self):
        parts = barycentric_decompose(TRI, lambda p: 1)
        x = (F(1, 5), F(2, 7))
        assert sum(affine_value(m, x) for m in parts) == 1

    def test_centroid_values(self):
        f = ((2, 3), 1)
        parts = barycentric_decompose(TRI, f)
        c = (F(1, 3), F(1, 3))
        assert [affine_value(m, c) for m in parts] == [F(1, 3), F(3, 3), F(4, 3)]
        assert sum(affine_value(m, c) for m in parts) == F(8, 3)

    def test_zero(self):
        parts = barycentric_decompose(TRI, lambda p: 0)
        assert all(affine_value(m, (F(3), F(-2))) == 0 for m in parts)

    def test_degenerate(self):
        with pytest.raises(DegenerateSimplex):
            barycentric_decompose([(0, 0), (1, 1), (2, 2)], lambda p: 1)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10 ** 6))
    def test_sum_and_faces(self, seed):
        rng = random.Random(seed)
        q = lambda: F(rng.randint(-20, 20), rng.randint(1, 9))
        while True:
            simplex = [(q(), q()) for _ in range(3)]
            try:
                parts = barycentric_decompose(simplex, ((q(), q()), q()))
                break
            except DegenerateSimplex:
                continue
        f = ((parts[0][0][0] + parts[1][0][0] + parts[2][0][0], parts[0][0][1] + parts[1][0][1] + parts[2][0][1]),
             parts[0][1] + parts[1][1] + parts[2][1])
        for _ in range(20):
            x = (q(), q())
            assert sum(affine_value(m, x) for m in parts) == affine_value(f, x)
        for i in range(3):
            a, b = [simplex[j] for j in range(3) if j != i]
            mid = ((a[0] + b[0]) / 2, (a[1] + b[1]) / 2)
            assert affine_value(parts[i], mid) == 0


class TestLego:
    CONE = ConeSpec((0, 0), [(1, 0), (0, 1)], (1, 1), 2)

    def test_values(self):
        net = lego_min_network(self.CONE)
        assert value(net, (2, 3)) == 4
        assert value(net, (-1, 5)) == 0

    def test_depth(self):
        assert lego_min_network(self.CONE).depth == 2

    def test_non_interior_direction(self):
        with pytest.raises(ValueError):
            lego_min_network(ConeSpec((0, 0), [(1, 0), (0, 1)], (1, -1), 1))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10 ** 6))
    def test_exact_at_random_points(self, seed):
        rng = random.Random(seed)
        k = rng.randint(1, 4)
        v = (F(1), F(rng.randint(1, 5), 3))
        normals = []
        while len(normals) < k:
            a = (F(rng.randint(-5, 5)), F(rng.randint(-5, 5)))
            if a[0] * v[0] + a[1] * v[1] > 0:
                normals.append(a)
        cone = ConeSpec((F(rng.randint(-3, 3)), F(1, 2)), normals, v, F(rng.randint(1, 5), 2))
        net = lego_min_network(cone)
        assert net.depth == k
        for p in random_probe_points(2, 30, seed=seed, lo=F(-5), hi=F(5)):
            assert value(net, p) == cone(p)


class TestVertexBlocks:
    def test_center_hat(self):
        cx = kuhn_grid_interpolant(lambda v: 1 if v == (F(1, 2), F(1, 2)) else 0, 2, 2)
        p = cx.vertices.index((F(1, 2), F(1, 2)))
        net = compile_vertex_block(cx, p)
        assert len(cx.star(p)) == 6
        for i, v in enumerate(cx.vertices):
            assert value(net, v) == (1 if i == p else 0)
        for s in cx.simplices:
            pts = [cx.vertices[i] for i in s]
            bary = tuple(sum(c) / 3 for c in zip(*pts))
            assert value(net, bary) == cx.hat(p, bary)

    def test_boundary_zero(self):
        cx = random_grid(2, 0)
        net = compile_vertex_block(cx, 0)
        assert all(value(net, p) == 0 for p in random_probe_points(2, 20))

    def test_single_simplex_apex(self):
        cx = PwlSimplicial(2, TRI, [(0, 1, 2)], [5, 0, 0], compact_support=False)
        net = compile_vertex_block(cx, 0)
        lam = barycentric_decompose(TRI, lambda p: 5 if p == TRI[0] else 0)[0]
        for p in random_probe_points(2, 40, lo=F(0), hi=F(1, 2)):
            assert value(net, p) == affine_value(lam, p)

    def test_nonconvex_star(self):
        cx = star_nonconvex()
        assert plan_vertex_block(cx, 0).path == "edges"
        net = compile_simplicial(cx)
        assert net.width == 10
        for p in random_probe_points(2, 200, lo=F(-2), hi=F(3)):
            assert value(net, p) == cx(p)
        # the edge construction uses more layers than 1 + n0 * S_p
        assert net.depth == 17 and depth_budget(cx) == 11

    def test_boundary_vertex_needs_star_mode(self):
        cx = PwlSimplicial(2, TRI, [(0, 1, 2)], [5, 0, 0], compact_support=False)
        with pytest.raises(ValueError):
            plan_vertex_block(cx, 0)
        assert plan_vertex_block(cx, 0, on_star=True).path == "convex"

    def test_mismatch_carries_point(self):
        e = ReconstructionMismatch(4, (F(1), F(0)), 1, 2)
        assert e.point == (1, 0) and "vertex 4" in str(e)


class TestSimplicial:
    def test_center_hat(self):
        cx = kuhn_grid_interpolant(lambda v: 1 if v == (F(1, 2), F(1, 2)) else 0, 2, 2)
        net = compile_simplicial(cx)
        assert net.width == 10
        for v in cx.vertices:
            assert value(net, v) == cx(v)

    def test_zero(self):
        net = compile_simplicial(kuhn_grid_interpolant(lambda v: 0, 2, 2))
        assert all(value(net, p) == 0 for p in random_probe_points(2, 10))

    def test_tent_1d(self):
        cx = kuhn_grid_interpolant(lambda v: 1 if v == (F(1, 2),) else 0, 1, 2)
        net = compile_simplicial(cx)
        assert net.width == 8
        tent = Pwl1D.from_knots([0, F(1, 2), 1], [0, 1, 0], 0, 0)
        assert exact_l1_distance_1d(network_to_pwl1d(net), network_to_pwl1d(compile_width3(tent)), (-2, 3)) == 0

    @pytest.mark.parametrize("seed", range(3))
    def test_random_grid(self, seed):
        cx = random_grid(3, seed)
        net = compile_simplicial(cx)
        assert net.width == 10 and net.depth <= depth_budget(cx)
        for p in cx.vertices:
            assert value(net, p) == cx(p)
        for p in random_probe_points(2, 60, seed=seed):
            assert value(net, p) == cx(p)

    def test_three_dimensional(self):
        cx = kuhn_grid_interpolant(lambda v: 1 if v == (F(1, 2),) * 3 else 0, 3, 2)
        net = compile_simplicial(cx)
        assert net.width == 12
        for p in random_probe_points(3, 40, lo=F(0), hi=F(1)):
            assert value(net, p) == cx(p)
