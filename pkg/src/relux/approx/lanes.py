"""Layer-synchronous building blocks.

A lane is a generator that yields the pre-activations of its neurons for
the next layer and receives the corresponding outputs back (as unit
expressions of the new layer).  It returns its result expression when done.
``parallel`` runs lanes side by side; ``run`` drives a lane on a builder.
"""
from __future__ import annotations

from fractions import Fraction

from ..core.builder import NetBuilder


class LaneMismatch(RuntimeError):
    pass


def run(b: NetBuilder, lane):
    try:
        pres = next(lane)
    except StopIteration as stop:
        return stop.value
    while True:
        outs = b.layer(pres)
        try:
            pres = lane.send(outs)
        except StopIteration as stop:
            return stop.value


def parallel(*lanes):
    lanes = list(lanes)
    pres = []
    results = [None] * len(lanes)
    for i, ln in enumerate(lanes):
        try:
            pres.append(next(ln))
        except StopIteration as stop:
            raise LaneMismatch("lane of depth 0 in a parallel group") from None
    while True:
        outs = yield [e for p in pres for e in p]
        k = 0
        done = []
        for i, ln in enumerate(lanes):
            chunk = outs[k:k + len(pres[i])]
            k += len(pres[i])
            try:
                pres[i] = ln.send(chunk)
                done.append(False)
            except StopIteration as stop:
                results[i] = stop.value
                done.append(True)
        if all(done):
            return tuple(results)
        if any(done):
            raise LaneMismatch("parallel lanes of different depth")


def split(parts, outs):
    """Apply each part's combiner to its slice of ``outs``."""
    vals, k = [], 0
    for pres, post in parts:
        vals.append(post(outs[k:k + len(pres)]))
        k += len(pres)
    return vals


def flat(parts):
    return [e for pres, _ in parts for e in pres]


# --- simple ReLU lanes ---------------------------------------------------------

def hold_shifted(b, v, offset, steps):
    """Carry v through ``steps`` layers as relu(v + offset) - offset (valid for v >= -offset)."""
    for _ in range(steps):
        o = yield [v + offset]
        v = o[0] - offset
    return v


def hold_pair(b, v, steps):
    """Carry an unbounded v as relu(v) - relu(-v)."""
    for _ in range(steps):
        o = yield [v, -v]
        v = o[0] - o[1]
    return v


def sawtooth_lane(b, t, n):
    """Width 3, depth n + 3: min(g_n(t), 1) with g_n the dyadic interpolant of t^2."""
    o = yield [t, -t, b.zero()]
    h = 2 * o[0] + 2 * o[1] - 1
    g = None
    for m in range(2, n + 3):
        c = Fraction(1, 2 ** (2 * m - 3))
        prev = b.constant(1) if m == 2 else g
        hp = [h, -h] if m <= n + 1 else [b.zero(), b.zero()]
        o = yield hp + [prev + c * (h - 1) + 1]
        if m <= n + 1:
            h = 2 * o[0] + 2 * o[1] - 1
        g = o[2] - 1
    o = yield [b.zero(), b.zero(), 1 - g]
    return 1 - o[2]


def sawtooth_product(b, x, y, n, scale=1):
    """Two sawtooth squares in parallel: scale^2 * xy for |x|, |y| <= scale (width 6, depth n+3)."""
    p, m = yield from parallel(sawtooth_lane(b, (x + y) / (2 * scale), n),
                               sawtooth_lane(b, (x - y) / (2 * scale), n))
    return (p - m) * scale * scale


def hold_zero(b, steps):
    for _ in range(steps):
        yield [b.zero()]
    return None
