"""Feedforward networks: affine layers separated by a pointwise activation."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import flint
import gmpy2
import numpy as np
from scipy.special import expit

from .scalars import (BINARY64, MODES, MPFR, RATIONAL, ModeError, check_value,
                      coerce, format_rational, mp_context, parse_rational, to_fraction)


class DimensionError(ValueError):
    pass


class NetworkFormatError(ValueError):
    """Malformed network file; the message names the offending field."""


# --- activations -----------------------------------------------------------

def _mp_softplus(t):
    if t > 0:
        return t + gmpy2.log1p(gmpy2.exp(-t))
    return gmpy2.log1p(gmpy2.exp(t))


def _mp_logistic(t):
    return 1 / (1 + gmpy2.exp(-t))


_FLOAT_ACT = {
    "relu": lambda z: np.maximum(z, 0.0),
    "square": lambda z: z * z,
    "gaussian": lambda z: np.exp(-z * z),
    "logistic": expit,
    "tanh": np.tanh,
    "softplus": lambda z: np.logaddexp(0.0, z),
}

_MP_ACT = {
    "relu": lambda t: t if t > 0 else t * 0,
    "square": lambda t: t * t,
    "gaussian": lambda t: gmpy2.exp(-t * t),
    "logistic": _mp_logistic,
    "tanh": gmpy2.tanh,
    "softplus": _mp_softplus,
}

_MP_EXP = np.frompyfunc(gmpy2.exp, 1, 1)
_MP_UFUNC = {k: np.frompyfunc(f, 1, 1) for k, f in _MP_ACT.items()}

# activations that stay inside the rationals
_EXACT_ACT = {"relu", "square"}

ACTIVATIONS = tuple(_FLOAT_ACT)
CATALOG = ("gaussian", "logistic", "tanh", "softplus")


def apply_activation(name: str, z, mode: str):
    """Apply activation ``name`` elementwise to an array in ``mode``."""
    if mode == BINARY64:
        return _FLOAT_ACT[name](z)
    if mode == RATIONAL:
        if name == "relu":
            return np.where(z > 0, z, Fraction(0))
        if name == "square":
            return z * z
        raise ModeError(f"activation {name!r} is not available in rational mode")
    if name == "logistic":
        return 1 / (1 + _MP_EXP(-z))
    if name == "gaussian":
        return _MP_EXP(-(z * z))
    return _MP_UFUNC[name](z)


# --- layers and networks ---------------------------------------------------

@dataclass(frozen=True)
class AffineLayer:
    weights: tuple  # tuple of row tuples, out x in
    bias: tuple

    def __post_init__(self):
        w = tuple(tuple(r) for r in self.weights)
        b = tuple(self.bias)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)
        if len(b) != len(w):
            raise DimensionError(f"bias length {len(b)} != row count {len(w)}")
        if w and len({len(r) for r in w}) != 1:
            raise DimensionError("ragged weight matrix")

    @property
    def rows(self) -> int:
        return len(self.weights)

    @property
    def cols(self) -> int:
        return len(self.weights[0]) if self.weights else 0

    def values(self):
        for r in self.weights:
            yield from r
        yield from self.bias


@dataclass(frozen=True)
class Network:
    layers: tuple
    activation: str = "relu"
    mode: str = RATIONAL
    precision: int | None = None  # bits, mpfr mode only
    _checked: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise DimensionError("a network needs at least one affine layer")
        if self.activation not in _FLOAT_ACT:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.mode not in MODES:
            raise ModeError(f"unknown scalar mode {self.mode!r}")
        if self.mode == MPFR and not self.precision:
            raise ModeError("mpfr networks carry a precision")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.rows != b.cols:
                raise DimensionError(f"layer widths do not chain: {a.rows} -> {b.cols}")
        if not self._checked:
            for layer in self.layers:
                for v in layer.values():
                    check_value(v, self.mode)

    # design (n_0, ..., n_{L+1})
    @property
    def design(self) -> tuple:
        return (self.layers[0].cols,) + tuple(l.rows for l in self.layers)

    @property
    def n_in(self) -> int:
        return self.layers[0].cols

    @property
    def n_out(self) -> int:
        return self.layers[-1].rows

    @property
    def depth(self) -> int:
        """Number of hidden layers L."""
        return len(self.layers) - 1

    @property
    def width(self) -> int:
        return max(self.design[1:-1], default=0)

    def max_coefficient(self):
        return max((abs(v) for l in self.layers for v in l.values()), default=0)

    @cached_property
    def _float_arrays(self):
        return [(np.array([[float(v) for v in r] for r in l.weights], dtype=float).reshape(l.rows, l.cols),
                 np.array([float(v) for v in l.bias], dtype=float)) for l in self.layers]

    @cached_property
    def _sparse_rows(self):
        return [[[(j, v) for j, v in enumerate(r) if v != 0] for r in l.weights] for l in self.layers]

    def with_mode(self, mode: str, precision: int | None = None) -> "Network":
        layers = [AffineLayer([[coerce(v, mode, precision) for v in r] for r in l.weights],
                              [coerce(v, mode, precision) for v in l.bias]) for l in self.layers]
        return Network(layers, self.activation, mode, precision if mode == MPFR else None)

    def __call__(self, x):
        return eval_network(self, x)


def make_network(layers: Sequence, activation: str = "relu", mode: str = RATIONAL,
                 precision: int | None = None) -> Network:
    """Build a network from nested (weights, bias) pairs, coercing entries to ``mode``."""
    out = []
    for w, b in layers:
        out.append(AffineLayer([[coerce(v, mode, precision) for v in r] for r in w],
                               [coerce(v, mode, precision) for v in b]))
    return Network(out, activation, mode, precision)


def _affine_sparse(rows, bias, z):
    out = []
    for r, b in zip(rows, bias):
        acc = None
        for j, w in r:
            t = z[j] * w
            acc = t if acc is None else acc + t
        if acc is None:
            acc = z[0] * 0 if len(z) else np.array([])
        out.append(acc + b)
    return np.array(out, dtype=object) if out else np.empty((0, z.shape[1]), dtype=object)


def eval_batch(net: Network, xs) -> np.ndarray:
    """Evaluate at many points; ``xs`` has shape (batch, n_0). Returns (batch, n_out)."""
    if net.mode == BINARY64:
        z = np.asarray(xs, dtype=float)
        if z.ndim == 1:
            z = z[:, None]
        if z.shape[1] != net.n_in:
            raise DimensionError(f"input dimension {z.shape[1]} != n_0 = {net.n_in}")
        z = z.T
        arrs = net._float_arrays
        for i, (w, b) in enumerate(arrs):
            z = w @ z + b[:, None]
            if i < len(arrs) - 1:
                z = _FLOAT_ACT[net.activation](z)
        return z.T
    if net.mode == RATIONAL and net.activation not in _EXACT_ACT:
        raise ModeError(f"activation {net.activation!r} needs binary64 or mpfr mode")
    pts = [list(p) if np.ndim(p) else [p] for p in xs]
    if any(len(p) != net.n_in for p in pts):
        raise DimensionError(f"input dimension != n_0 = {net.n_in}")
    if net.mode == RATIONAL:
        z = np.array([[to_fraction(v) for v in p] for p in pts], dtype=object).T
        return _run_object(net, z).T
    if net.activation in _BALL_ACT:
        return _run_ball(net, pts)
    with mp_context(net.precision):
        z = np.array([[coerce(v, MPFR, net.precision) for v in p] for p in pts], dtype=object).T
        return _run_object(net, z).T


# Smooth activations in mpfr mode run on arb balls at the network precision
# (several times faster than per-element gmpy2 calls); midpoints are returned.
# Radii are dropped before each activation so they cannot blow up with depth.
_MID = np.frompyfunc(flint.arb.mid, 1, 1)
_BALL_EXP = np.frompyfunc(flint.arb.exp, 1, 1)
_BALL_ACT = {
    "square": lambda z: _MID(z) ** 2,
    "gaussian": lambda z: _BALL_EXP(-(_MID(z) ** 2)),
    "logistic": lambda z: 1 / (1 + _BALL_EXP(-_MID(z))),
    "tanh": lambda z: _BALL_TANH(_MID(z)),
}
_BALL_TANH = np.frompyfunc(flint.arb.tanh, 1, 1)


def _to_ball(v):
    if v == 0:
        return flint.arb(0)
    m, e = gmpy2.mpfr(v).as_mantissa_exp()
    return flint.arb(flint.fmpz(int(m))) * flint.arb(2) ** int(e)


def _ball_mid(a):
    m, e = a.mid().man_exp()
    return gmpy2.mul_2exp(gmpy2.mpfr(int(m)), int(e))


_BALL_MID = np.frompyfunc(_ball_mid, 1, 1)


def _run_ball(net: Network, pts):
    old = flint.ctx.prec
    flint.ctx.prec = net.precision
    try:
        layers = net.__dict__.get("_ball_layers")
        if layers is None:
            with mp_context(net.precision):
                layers = [([[(j, _to_ball(w)) for j, w in r] for r in rows], [_to_ball(b) for b in layer.bias])
                          for rows, layer in zip(net._sparse_rows, net.layers)]
            object.__setattr__(net, "_ball_layers", layers)
        with mp_context(net.precision):
            z = np.array([[_to_ball(coerce(v, MPFR, net.precision)) for v in p] for p in pts], dtype=object).T
        act = _BALL_ACT[net.activation]
        for i, (rows, bias) in enumerate(layers):
            z = _affine_sparse(rows, bias, z)
            if i < len(layers) - 1:
                z = act(z)
        with mp_context(net.precision):
            return _BALL_MID(z).T
    finally:
        flint.ctx.prec = old


def _run_object(net: Network, z):
    rows = net._sparse_rows
    for i, layer in enumerate(net.layers):
        z = _affine_sparse(rows[i], layer.bias, z)
        if i < len(net.layers) - 1:
            z = apply_activation(net.activation, z, net.mode)
    return z


def eval_network(net: Network, x):
    """Evaluate at one point; returns a list of length n_out."""
    if np.ndim(x) == 0:
        x = [x]
    if len(x) != net.n_in:
        raise DimensionError(f"input dimension {len(x)} != n_0 = {net.n_in}")
    return list(eval_batch(net, [list(x)])[0])


# --- serialization ---------------------------------------------------------

def _dump_scalar(v, mode):
    if mode == BINARY64:
        return float(v)
    return format_rational(to_fraction(v))


def network_to_json(net: Network) -> dict:
    d = {
        "version": 1,
        "activation": net.activation,
        "scalar_mode": net.mode,
        "layers": [{"rows": l.rows, "cols": l.cols,
                    "weights": [[_dump_scalar(v, net.mode) for v in r] for r in l.weights],
                    "bias": [_dump_scalar(v, net.mode) for v in l.bias]} for l in net.layers],
    }
    if net.mode == MPFR:
        d["precision"] = net.precision
    return d


def network_from_json(d: dict) -> Network:
    def fail(where, msg):
        raise NetworkFormatError(f"{where}: {msg}")

    if not isinstance(d, dict):
        fail("<root>", "expected an object")
    if d.get("version") != 1:
        fail("version", f"unsupported version {d.get('version')!r}")
    mode = d.get("scalar_mode")
    if mode not in MODES:
        fail("scalar_mode", f"unknown mode {mode!r}")
    act = d.get("activation")
    if act not in _FLOAT_ACT:
        fail("activation", f"unknown activation {act!r}")
    prec = d.get("precision") if mode == MPFR else None
    if mode == MPFR and not isinstance(prec, int):
        fail("precision", "mpfr networks need an integer precision")

    def read(v, where):
        if mode == BINARY64:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                fail(where, f"expected a number, got {v!r}")
            return float(v)
        if not isinstance(v, str):
            fail(where, f"expected a 'p/q' string, got {v!r}")
        try:
            q = parse_rational(v)
        except (ValueError, ZeroDivisionError):
            fail(where, f"not a rational: {v!r}")
        return coerce(q, mode, prec)

    layers = []
    for i, ld in enumerate(d.get("layers") or fail("layers", "missing or empty")):
        rows, cols = ld.get("rows"), ld.get("cols")
        w, b = ld.get("weights"), ld.get("bias")
        if not isinstance(w, list) or len(w) != rows:
            fail(f"layers[{i}].weights", f"expected {rows} rows")
        if not isinstance(b, list) or len(b) != rows:
            fail(f"layers[{i}].bias", f"expected {rows} entries")
        ww = []
        for r, row in enumerate(w):
            if not isinstance(row, list) or len(row) != cols:
                fail(f"layers[{i}].weights[{r}]", f"expected {cols} entries")
            ww.append([read(v, f"layers[{i}].weights[{r}][{c}]") for c, v in enumerate(row)])
        bb = [read(v, f"layers[{i}].bias[{r}]") for r, v in enumerate(b)]
        layers.append(AffineLayer(ww, bb))
    try:
        return Network(layers, act, mode, prec)
    except DimensionError as e:
        fail("layers", str(e))


def save_network(net: Network, path) -> None:
    with open(path, "w") as fh:
        json.dump(network_to_json(net), fh, indent=1)
        fh.write("\n")


def load_network(path) -> Network:
    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as e:
            raise NetworkFormatError(f"line {e.lineno}: {e.msg}") from None
    return network_from_json(d)
