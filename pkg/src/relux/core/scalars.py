"""Scalar modes and conversions.

Three modes are understood:

* ``rational``  exact :class:`fractions.Fraction` arithmetic,
* ``binary64``  plain IEEE doubles,
* ``mpfr``      multiprecision binary floats (gmpy2) at a stated bit precision.
"""
from __future__ import annotations

from fractions import Fraction
from numbers import Rational

import gmpy2

RATIONAL = "rational"
BINARY64 = "binary64"
MPFR = "mpfr"
MODES = (RATIONAL, BINARY64, MPFR)


class ModeError(TypeError):
    """A value does not belong to the scalar mode it is used in."""


def mp_context(bits: int):
    """Context manager running gmpy2 arithmetic at ``bits`` of precision."""
    return gmpy2.context(gmpy2.get_context(), precision=bits)


_ZERO_F = 0.0


def to_fraction(v) -> Fraction:
    """Exact conversion; floats and mpfr values convert bit-exactly."""
    if isinstance(v, Fraction):
        return v
    if isinstance(v, bool):
        raise ModeError("booleans are not scalars")
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, float):
        return Fraction(*v.as_integer_ratio())
    if isinstance(v, Rational):
        return Fraction(v.numerator, v.denominator)
    if isinstance(v, type(gmpy2.mpfr(0))):
        return Fraction(*v.as_integer_ratio())
    if isinstance(v, type(gmpy2.mpq(0))):
        return Fraction(int(v.numerator), int(v.denominator))
    if isinstance(v, str):
        return parse_rational(v)
    raise ModeError(f"cannot read {v!r} as a rational")


def parse_rational(s: str) -> Fraction:
    s = s.strip()
    if "/" in s:
        p, q = s.split("/")
        return Fraction(int(p), int(q))
    return Fraction(s)


def format_rational(v: Fraction) -> str:
    v = to_fraction(v)
    return f"{v.numerator}/{v.denominator}"


def coerce(v, mode: str, precision: int | None = None):
    """Convert ``v`` into ``mode``; exact whenever the target can hold it."""
    if mode == RATIONAL:
        return to_fraction(v)
    if mode == BINARY64:
        if isinstance(v, str):
            v = parse_rational(v)
        v = float(v)
        return _ZERO_F if v == 0 else v   # share the zero object in large sparse layers
    if mode == MPFR:
        if precision is None:
            raise ModeError("mpfr mode needs a precision")
        if isinstance(v, str):
            v = parse_rational(v)
        with mp_context(precision):
            if isinstance(v, Fraction):
                return gmpy2.mpfr(gmpy2.mpq(v.numerator, v.denominator))
            return gmpy2.mpfr(v)
    raise ModeError(f"unknown scalar mode {mode!r}")


def check_value(v, mode: str) -> None:
    """Reject values that would silently mix modes."""
    if mode == RATIONAL:
        if not isinstance(v, Fraction):
            raise ModeError(f"expected Fraction in rational mode, got {type(v).__name__}")
    elif mode == BINARY64:
        if not isinstance(v, float):
            raise ModeError(f"expected float in binary64 mode, got {type(v).__name__}")
    elif mode == MPFR:
        if not isinstance(v, type(gmpy2.mpfr(0))):
            raise ModeError(f"expected mpfr in mpfr mode, got {type(v).__name__}")
    else:
        raise ModeError(f"unknown scalar mode {mode!r}")


def zero(mode: str, precision: int | None = None):
    return coerce(0, mode, precision)


def one(mode: str, precision: int | None = None):
    return coerce(1, mode, precision)
