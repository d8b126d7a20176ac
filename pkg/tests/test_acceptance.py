"""End-to-end acceptance checks, one test per criterion.

Each test records one ``criterion N: PASS|FAIL ...`` line; the lines are printed in an
"acceptance" section of the pytest terminal summary.
"""
import itertools
import math
import random
import sys
import time
from fractions import Fraction as F

import numpy as np
import pytest

from helpers import ACCEPTANCE_LINES, h_network, random_pwl
from oracles import activation_count_max, exact_forward, float_forward, newman_relu_float, regions_1d
from relux import compile1d
from relux.approx import (newman_rational_reference, probe_grid, relu_from_activation_net, sawtooth_square_net,
                          transform_activation_to_relu, transform_relu_to_activation)
from relux.bounds import brute_force_activation_max, f_jd, r_exact_1d, upper_bound_general
from relux.compile1d import build_max_region_network, compile_width3, compile_widthW
from relux.compilend import compile_simplicial, kuhn_grid_interpolant, random_probe_points
from relux.core import BINARY64, Pwl1D, cell_decomposition_2d, count_regions_1d, eval_batch, make_network, \
    network_to_pwl1d
from relux.separation import (certificate_bound, gadget_pwl, grid_oracle, random_candidate,
                              regions_in_unit_interval, separation_certificate, sobolev_rate_experiment,
                              width_ineff_gadget)

DESIGNS_1D = [(1, *w, 1) for L in (1, 2, 3) for w in itertools.product((2, 3, 4), repeat=L)]


def emit(n, ok, detail, t0):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}  [{time.time() - t0:.1f} s]"
    ACCEPTANCE_LINES.append(line)


# --- 1: exact 1-D region formula ----------------------------------------------------------

def _batch(rng, design, B):
    """Random nets with weights num/den, num in [-5, 5], den in [1, 4]; float arrays plus integer parts."""
    floats, ints = [], []
    for a, b in zip(design, design[1:]):
        wn, wd = rng.integers(-5, 6, (B, b, a)), rng.integers(1, 5, (B, b, a))
        bn, bd = rng.integers(-5, 6, (B, b)), rng.integers(1, 5, (B, b))
        floats.append((wn / wd, bn / bd))
        ints.append((wn, wd, bn, bd))
    return floats, ints


def _exact_net(ints, i):
    return make_network([([[F(int(n), int(d)) for n, d in zip(rn, rd)] for rn, rd in zip(wn[i], wd[i])],
                          [F(int(n), int(d)) for n, d in zip(bn[i], bd[i])]) for wn, wd, bn, bd in ints])


def _hidden(floats, X, upto):
    h = X[:, :, None]
    for i, (W, b) in enumerate(floats[:upto]):
        z = np.einsum("bkj,bij->bki", h, W) + b[:, None, :]
        if i == upto - 1:
            return z
        h = np.maximum(z, 0.0)


def _dedupe(P):
    P = np.sort(P, axis=1)
    with np.errstate(invalid="ignore"):
        gap = np.diff(P, axis=1)
    dup = np.isfinite(P[:, 1:]) & (gap <= 1e-12 * (1 + np.abs(P[:, 1:])))
    P[:, 1:][dup] = np.inf
    P = np.sort(P, axis=1)
    keep = np.isfinite(P).any(0)
    return P[:, keep] if keep.any() else P[:, :1]


def _ends(P):
    fin = np.isfinite(P)
    lo = np.where(fin.any(1), np.where(fin, P, np.inf).min(1), 0.0)
    hi = np.where(fin.any(1), np.where(fin, P, -np.inf).max(1), 0.0)
    return lo, hi


def screen_regions(floats):
    """Binary64 region counts for a batch of one-input nets.

    Breakpoints are propagated layer by layer: on every interval between known
    breakpoints each pre-activation is affine, so its root is found by linear
    interpolation (and by extrapolation on the two unbounded pieces).  Float noise
    only adds spurious breakpoints, so the count errs upwards; exceeders are
    rechecked exactly.
    """
    W0, b0 = floats[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        P = -b0 / W0[:, :, 0]
    P = _dedupe(np.where(np.isfinite(P), P, np.inf))
    for layer in range(2, len(floats)):
        B, K = P.shape
        fin = np.isfinite(P)
        lo, hi = _ends(P)
        Z = _hidden(floats, np.where(fin, P, 0.0), layer)
        E = _hidden(floats, np.stack([lo - 1, lo, hi, hi + 1], 1), layer)
        a, b = Z[:, :-1], Z[:, 1:]
        with np.errstate(divide="ignore", invalid="ignore"):
            r = P[:, :-1, None] - a * (P[:, 1:, None] - P[:, :-1, None]) / (b - a)
            inner = np.where(fin[:, :-1, None] & fin[:, 1:, None] & (a * b < 0), r, np.inf).reshape(B, -1)
            tl = E[:, 1] / (E[:, 1] - E[:, 0])
            tr = -E[:, 2] / (E[:, 3] - E[:, 2])
        left = np.where(np.isfinite(tl) & (tl > 0), lo[:, None] - tl, np.inf)
        right = np.where(np.isfinite(tr) & (tr > 0), hi[:, None] + tr, np.inf)
        P = _dedupe(np.concatenate([P, inner, left, right], axis=1))
    lo, hi = _ends(P)
    X = np.sort(np.concatenate([(lo - 1)[:, None], P, (hi + 1)[:, None]], axis=1), axis=1)
    fin = np.isfinite(X)
    Y = _hidden(floats, np.where(fin, X, 0.0), len(floats))[:, :, 0]
    with np.errstate(invalid="ignore", divide="ignore"):
        S = np.diff(Y, axis=1) / np.diff(X, axis=1)
    ok = fin[:, 1:]
    counts = np.ones(len(X), dtype=int)
    for i in range(len(X)):
        s = S[i][ok[i]]
        counts[i] += int(np.sum(np.abs(np.diff(s)) > 1e-7 * (1 + np.abs(s[:-1]))))
    return counts


def test_criterion_1_exact_1d_formula():
    t0 = time.time()
    rng = np.random.default_rng(1)
    built_ok, exceed, rechecked, screen_bad = True, 0, 0, 0
    for d in DESIGNS_1D:
        R = r_exact_1d(d)[0]
        net = build_max_region_network(d)
        built_ok &= count_regions_1d(net) == R == regions_1d(net)
        floats, ints = _batch(rng, d, 10 ** 4)
        counts = screen_regions(floats)
        for i in np.flatnonzero(counts > R):
            rechecked += 1
            exceed += count_regions_1d(_exact_net(ints, i)) > R
        for i in range(10):
            screen_bad += count_regions_1d(_exact_net(ints, i)) > counts[i]
    ok = built_ok and exceed == 0 and screen_bad == 0
    emit(1, ok, f"{len(DESIGNS_1D)} designs reach R exactly; 10^4 random nets each, {rechecked} rechecked "
                f"exactly, {exceed} exceed", t0)
    assert built_ok and screen_bad == 0
    assert exceed == 0


# --- 2: corrected upper bound ---------------------------------------------------------

def _random_2d(rng):
    L = rng.randint(1, 3)
    ws = [2] + [rng.randint(1, 5) for _ in range(L)] + [1]
    q = lambda: F(rng.randint(-5, 5), rng.randint(1, 4))
    return tuple(ws), make_network([([[q() for _ in range(a)] for _ in range(b)], [q() for _ in range(b)])
                                    for a, b in zip(ws, ws[1:])])


def test_criterion_2_corrected_upper_bound():
    t0 = time.time()
    fixtures = all(upper_bound_general(d).value >= count_regions_1d(build_max_region_network(d))
                   for d in DESIGNS_1D)
    rng = random.Random(2)
    worst = 0
    cells_ok = True
    for _ in range(100):
        design, net = _random_2d(rng)
        regions = cell_decomposition_2d(net).regions
        bound = upper_bound_general(design).value
        cells_ok &= bound >= regions
        worst = max(worst, regions / bound)
    designs = set()
    while len(designs) < 200:
        designs.add((rng.randint(1, 4), *[rng.randint(1, 8) for _ in range(rng.randint(1, 4))], 1))
    prev_ok = all(upper_bound_general(d).value <= upper_bound_general(d, "previous").value for d in designs)
    emit(2, fixtures and cells_ok and prev_ok,
         f"{len(DESIGNS_1D)} fixtures; 100 random 2-D nets (max regions/bound {worst:.3f}); "
         f"corrected <= previous on {len(designs)} designs", t0)
    assert fixtures and cells_ok and prev_ok


# --- 3: activation-set counts -----------------------------------------------------------

def test_criterion_3_activation_counts():
    t0 = time.time()
    checked = 0
    ok = True
    for n in range(1, 6):
        for m in range(n + 1):
            want = sum(f_jd(j, 1, n) for j in range(m + 1))
            ok &= brute_force_activation_max(n, m) == want == activation_count_max(n, m)
            checked += 1
    emit(3, ok, f"{checked} (n, m) pairs with n <= 5 equal to brute force", t0)
    assert ok


# --- 4: 1-D compilers ------------------------------------------------------------------

def test_criterion_4_compilers():
    t0 = time.time()
    rng = random.Random(4)
    bad = []
    for i in range(1000):
        k = rng.randint(1, 12)
        f = random_pwl(rng, k)
        net = compile_width3(f)
        if network_to_pwl1d(net) != f or net.depth != max(1, k - 2) or net.width > 3:
            bad.append((i, 3))
        for W in (5, 6, 8):
            net = compile_widthW(f, W)
            if network_to_pwl1d(net) != f or net.width != W:
                bad.append((i, W))
    emit(4, not bad, f"1000 random PWLs (k <= 12) x widths 3, 5, 6, 8; {len(bad)} mismatches", t0)
    assert not bad


# --- 5: simplicial compiler ----------------------------------------------------------------

def test_criterion_5_simplicial():
    t0 = time.time()
    ok = True
    probes = 0
    for r in (2, 4):
        rng = random.Random(50 + r)
        cx = kuhn_grid_interpolant(
            lambda v: 0 if any(c in (0, 1) for c in v) else F(rng.randint(-9, 9), rng.randint(1, 9)), 2, r)
        net = compile_simplicial(cx)
        ok &= net.width == 10
        bary = [tuple(sum(c) / 3 for c in zip(*(cx.vertices[i] for i in s))) for s in cx.simplices]
        pts = list(cx.vertices) + bary + random_probe_points(2, 1000, seed=r)
        ok &= all(exact_forward(net, p)[0][0] == cx(p) for p in pts)
        probes += len(pts)
    emit(5, ok, f"r = 2, 4: width 10, exact at {probes} vertices, barycenters and random points", t0)
    assert ok


# --- 6: relu from smooth activations ---------------------------------------------------

@pytest.mark.slow
def test_criterion_6_newman():
    t0 = time.time()
    xs = probe_grid(-1, 1)
    ok = True
    parts = []
    rng = np.random.default_rng(6)
    spot = rng.uniform(-1, 1, 50)
    for n in (4, 9, 16):
        ref = newman_rational_reference(n, xs)
        e_ref = float(np.max(np.abs(ref - np.maximum(xs, 0))))
        ok &= e_ref <= 1.5 * math.exp(-math.sqrt(n))
        ok &= np.allclose(ref, newman_relu_float(n, xs), atol=1e-12)
        for act in ("logistic", "gaussian"):
            net, rep = relu_from_activation_net(act, n)
            bound = 2.5 * math.exp(-math.sqrt(n)) + 1e-6
            ys = np.array([float(y) for y in eval_batch(net, spot[:, None])[:, 0]])
            ok &= rep.grid_size >= 10 ** 4 and rep.max_abs_error <= bound
            ok &= float(np.max(np.abs(ys - np.maximum(spot, 0)))) <= bound
            parts.append(f"{act[0]}{n}={rep.max_abs_error / bound:.2f}")
    emit(6, ok, "reference and nets within bound for n = 4, 9, 16; error/bound " + " ".join(parts), t0)
    assert ok


# --- 7: sawtooth square ----------------------------------------------------------------

def test_criterion_7_sawtooth():
    t0 = time.time()
    ok = True
    for n in range(11):
        net, rep = sawtooth_square_net(n)
        f = network_to_pwl1d(net)
        ok &= rep.max_abs_error <= 4.0 ** -n + 1e-12
        ok &= net.depth == n + 3 and net.width == 3
        ok &= all(f(F(i, 2 ** n)) == F(i, 2 ** n) ** 2 for i in range(-2 ** n, 2 ** n + 1))
        ok &= all(-1 <= x <= 1 for x in f.breakpoints) and f(-1) == f(1) == 1
        ok &= f.slopes[0] == f.slopes[-1] == 0 and max(abs(s) for s in f.slopes) <= 2
        xs = np.linspace(-1, 1, 4097)
        ok &= float(np.max(np.abs(float_forward(net, xs[:, None])[:, 0] - xs * xs))) <= 4.0 ** -n + 1e-12
    emit(7, ok, "n = 0..10: error <= 4^-n, dyadic interpolation, slope <= 2, 1 outside [-1, 1], "
                "depth n + 3, width 3", t0)
    assert ok


# --- 8: activation transforms ----------------------------------------------------------

def tanh_net():
    rng = random.Random(8)
    q = lambda: F(rng.randint(-8, 8), 8)
    dims = (1, 3, 3, 1)
    return make_network([([[q() for _ in range(a)] for _ in range(b)], [q() for _ in range(b)])
                         for a, b in zip(dims, dims[1:])], activation="tanh", mode=BINARY64)


@pytest.mark.slow
def test_criterion_8_transforms():
    t0 = time.time()
    xs = np.linspace(-1, 1, 2001)[:, None]
    net = tanh_net()
    relu, rep1 = transform_activation_to_relu(net, 1e-2)
    e1 = float(np.max(np.abs(eval_batch(relu, xs)[:, 0].astype(float) - float_forward(net, xs)[:, 0])))
    absnet = make_network([([[1], [-1]], [0, 0]), ([[1, 1]], [0])])
    logi, rep2 = transform_relu_to_activation(absnet, "logistic", 5e-2)
    spot = np.random.default_rng(8).uniform(-1, 1, (100, 1))
    e2 = float(np.max(np.abs(np.array([float(y) for y in eval_batch(logi, spot)[:, 0]]) - np.abs(spot[:, 0]))))
    ok = (relu.activation == "relu" and rep1.max_abs_error <= 1e-2 and e1 <= 1e-2
          and logi.activation == "logistic" and rep2.max_abs_error <= 5e-2 and e2 <= 5e-2)
    emit(8, ok, f"tanh -> relu error {max(e1, rep1.max_abs_error):.2e} (<= 1e-2); "
                f"|x| relu -> logistic error {max(e2, rep2.max_abs_error):.2e} (<= 5e-2)", t0)
    assert ok


# --- 9: width-inefficiency certificate -----------------------------------------------------

def test_criterion_9_separation():
    t0 = time.time()
    gadget = width_ineff_gadget(2)
    g = gadget_pwl(2)
    ok = regions_in_unit_interval(g) == 81 == count_regions_1d(gadget) and gadget.max_coefficient() <= 6
    half = separation_certificate(Pwl1D.affine(0, F(1, 2)), 2, regions=4)
    ok &= half.measured_l1 == F(1, 4) and half.lower_bound == F(75, 648) and F(75, 648) >= F(1, 9)
    rng = random.Random(9)
    small = 0
    for _ in range(200):
        f = random_candidate(rng)
        cert = separation_certificate(f, 2)
        ok &= cert.measured_l1 >= cert.lower_bound
        if cert.candidate_regions <= 4:
            small += 1
            ok &= cert.measured_l1 >= F(1, 9)
    best, dist, count = grid_oracle(2)
    cert = separation_certificate(best, 2, regions=4)
    ok &= dist == cert.measured_l1 >= cert.lower_bound and dist >= F(1, 9)
    ok &= certificate_bound(2, 4) == F(75, 648)
    emit(9, ok, f"gadget 81 regions, coeff <= 6; constant 1/2 at 1/4 >= 75/648; 200 random candidates "
                f"({small} with <= 4 regions); grid minimiser over {count} candidates at {dist}", t0)
    assert ok


# --- 10: Sobolev rate --------------------------------------------------------------------

def test_criterion_10_sobolev():
    t0 = time.time()
    rep = sobolev_rate_experiment("bump2d", (4, 8, 16))
    ok = rep.order >= 0.8 and all(1.6 <= q <= 2.6 for q in rep.ratios) and set(rep.widths) == {10}
    emit(10, ok, f"order {rep.order:.3f}, ratios {', '.join(f'{q:.2f}' for q in rep.ratios)}", t0)
    assert ok


# --- 11: width-2 shapes ------------------------------------------------------------------

def _width2(rng, depth):
    q = lambda: F(rng.randint(-6, 6), rng.randint(1, 4))
    layers = [([[q()], [q()]], [q(), q()])]
    layers += [([[q(), q()], [q(), q()]], [q(), q()]) for _ in range(depth - 1)]
    return make_network(layers + [([[q(), q()]], [q()])])


def _shape_ok(f):
    return f.is_monotone() or f.bounded_above() or f.bounded_below()


def _genuine(net):
    """Independent confirmation of a violation: float values show a dip and both tails unbounded."""
    f = network_to_pwl1d(net)
    pts = [f.breakpoints[0] - 1, *f.breakpoints, f.breakpoints[-1] + 1]
    xs = np.array([[float(x)] for x in pts] + [[-1e6], [1e6]])
    ys = float_forward(net, xs)[:, 0]
    d = np.diff(ys[:-2])
    not_monotone = (d > 1e-9).any() and (d < -1e-9).any()
    return not_monotone and max(abs(ys[-2]), abs(ys[-1])) > 1e4 and ys[-2] * ys[-1] < 0


def test_criterion_11_width2():
    t0 = time.time()
    rng = random.Random(11)
    violators, by_depth = [], {}
    for _ in range(500):
        depth = rng.randint(1, 5)
        net = _width2(rng, depth)
        if not _shape_ok(network_to_pwl1d(net)):
            violators.append((depth, net))
            by_depth[depth] = by_depth.get(depth, 0) + 1
    one_layer = all(_shape_ok(network_to_pwl1d(_width2(rng, 1))) for _ in range(500))
    h_fails = not _shape_ok(network_to_pwl1d(h_network()))
    no_width2 = not [n for n in dir(compile1d) if "width2" in n.lower()]
    try:
        compile_widthW(network_to_pwl1d(h_network()), 2)
        rejected = False
    except ValueError:
        rejected = True
    genuine = all(d >= 2 and _genuine(net) for d, net in violators)
    holds = not violators
    emit(11, holds and h_fails and rejected,
         f"{len(violators)}/500 random width-2 nets are neither monotone nor bounded on one side "
         f"(by depth {dict(sorted(by_depth.items()))}, all confirmed in float); one hidden layer: "
         f"{'500/500 hold' if one_layer else 'violations'}; h fails all three: {h_fails}; "
         f"width 2 rejected: {rejected and no_width2}", t0)
    # The shape property only holds with one hidden layer; deeper counterexamples are genuine.
    assert one_layer and h_fails and rejected and no_width2 and genuine


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
