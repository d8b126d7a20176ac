"""Incremental network construction from linear expressions.

A :class:`Lin` is an affine expression in the outputs of one specific layer
(the inputs count as layer 0).  ``NetBuilder.layer`` turns a list of such
expressions into the pre-activations of a new hidden layer and hands back unit
expressions for the new neurons, so compilers can be written neuron by neuron.
"""
from __future__ import annotations

from fractions import Fraction

from .network import AffineLayer, Network
from .scalars import RATIONAL, coerce


class Lin:
    __slots__ = ("frame", "coef", "const")

    def __init__(self, frame: int, coef: dict | None = None, const=0):
        self.frame = frame
        self.coef = {k: v for k, v in (coef or {}).items() if v != 0}
        self.const = const

    def _frame_of(self, other):
        if isinstance(other, Lin):
            if other.frame != self.frame:
                raise ValueError(f"mixing expressions of layer {self.frame} and {other.frame}")
            return other
        return Lin(self.frame, {}, other)

    def __add__(self, other):
        o = self._frame_of(other)
        c = dict(self.coef)
        for k, v in o.coef.items():
            c[k] = c.get(k, 0) + v
        return Lin(self.frame, c, self.const + o.const)

    __radd__ = __add__

    def __neg__(self):
        return Lin(self.frame, {k: -v for k, v in self.coef.items()}, -self.const)

    def __sub__(self, other):
        return self + (-self._frame_of(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, s):
        if isinstance(s, Lin):
            raise TypeError("expressions are affine; products are not allowed")
        return Lin(self.frame, {k: v * s for k, v in self.coef.items()}, self.const * s)

    __rmul__ = __mul__

    def __truediv__(self, s):
        return self * (Fraction(1) / s if isinstance(s, (int, Fraction)) else 1 / s)

    def __repr__(self):
        return f"Lin(frame={self.frame}, {self.coef}, {self.const})"


class NetBuilder:
    """Builds a network layer by layer.

    ``mode``/``precision`` decide how the collected coefficients are coerced
    when :meth:`finish` is called; expressions may hold Fractions or floats.
    """

    def __init__(self, n_in: int, activation: str = "relu", mode: str = RATIONAL, precision=None):
        self.n_in = n_in
        self.activation = activation
        self.mode = mode
        self.precision = precision
        self.frame = 0
        self.width = n_in
        self._layers = []

    def inputs(self):
        return [Lin(0, {i: 1}) for i in range(self.n_in)]

    def zero(self):
        return Lin(self.frame)

    def constant(self, c):
        return Lin(self.frame, {}, c)

    def _row(self, e):
        if not isinstance(e, Lin):
            e = Lin(self.frame, {}, e)
        if e.frame != self.frame:
            raise ValueError(f"expression belongs to layer {e.frame}, builder is at {self.frame}")
        row = [0] * self.width
        for k, v in e.coef.items():
            row[k] = v
        return row, e.const

    def layer(self, exprs):
        """Add a hidden layer with the given pre-activations; return unit outputs."""
        rows = [self._row(e) for e in exprs]
        self._layers.append(([r for r, _ in rows], [c for _, c in rows]))
        self.frame += 1
        self.width = len(exprs)
        return [Lin(self.frame, {i: 1}) for i in range(self.width)]

    @property
    def depth(self) -> int:
        return len(self._layers)

    def finish(self, outputs) -> Network:
        rows = [self._row(e) for e in outputs]
        raw = self._layers + [([r for r, _ in rows], [c for _, c in rows])]
        m, p = self.mode, self.precision
        layers = [AffineLayer([[coerce(v, m, p) for v in r] for r in w], [coerce(v, m, p) for v in b])
                  for w, b in raw]
        return Network(layers, self.activation, m, p)


def identity_pair(x: Lin):
    """Pre-activations storing a scalar through a ReLU layer: x = relu(x) - relu(-x)."""
    return [x, -x]


def compose(outer: Network, inner: Network) -> Network:
    """Network for ``outer(inner(x))``; the last affine map of ``inner`` is merged into
    the first affine map of ``outer`` (enhanced-neuron bookkeeping)."""
    if inner.n_out != outer.n_in:
        raise ValueError("dimension mismatch in composition")
    if inner.activation != outer.activation or inner.mode != outer.mode:
        raise ValueError("can only compose networks of the same activation and mode")
    a, b = inner.layers[-1], outer.layers[0]
    w = [[sum((b.weights[i][k] * a.weights[k][j] for k in range(a.rows)), start=0 * a.weights[0][0])
          for j in range(a.cols)] for i in range(b.rows)]
    bias = [b.bias[i] + sum((b.weights[i][k] * a.bias[k] for k in range(a.rows)), start=0 * b.bias[i])
            for i in range(b.rows)]
    merged = AffineLayer(w, bias)
    return Network(inner.layers[:-1] + (merged,) + outer.layers[1:], outer.activation, outer.mode,
                   outer.precision)
