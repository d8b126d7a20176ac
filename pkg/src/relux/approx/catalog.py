"""Activation catalog: evaluation, derivative recurrences and certificates."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from functools import lru_cache

import gmpy2
import mpmath
import numpy as np
from scipy.special import expit

from ..core.pwl import Pwl1D

RAMP_DELTA = Fraction(1, 10 ** 6)
N_MAX = 40


class PrecisionError(ArithmeticError):
    """The requested accuracy is out of reach in the chosen scalar mode."""


class CertificateViolation(AssertionError):
    pass


@dataclass
class ApproxReport:
    target: str
    interval: tuple
    grid_size: int
    max_abs_error: float
    bound: float
    depth: int
    width: int

    @property
    def ok(self) -> bool:
        return self.max_abs_error <= self.bound

    def as_dict(self) -> dict:
        d = asdict(self)
        d["interval"] = [float(v) for v in self.interval]
        return d


def probe_grid(lo, hi, n_grid=10 ** 4, n_random=10 ** 3, seed=0):
    """Uniform grid (endpoints included) plus uniform random points, sorted."""
    rng = np.random.default_rng(seed)
    pts = np.concatenate([np.linspace(float(lo), float(hi), n_grid), rng.uniform(float(lo), float(hi), n_random)])
    return np.sort(pts)


# --- derivative recurrences -------------------------------------------------

@lru_cache(maxsize=None)
def _poly_derivatives(kind: str, n: int):
    """Integer coefficient lists p_k(u), k <= n, with rho^(k) = p_k(u(x)).

    logistic: u = s, s' = s - s^2;  tanh: u = t, t' = 1 - t^2.
    """
    mult = {"logistic": (0, 1, -1), "tanh": (1, 0, -1)}[kind]
    ps = [(0, 1)]
    for _ in range(n):
        p = ps[-1]
        d = [i * p[i] for i in range(1, len(p))]
        out = [0] * (len(d) + len(mult) - 1)
        for i, a in enumerate(d):
            for j, b in enumerate(mult):
                out[i + j] += a * b
        while len(out) > 1 and out[-1] == 0:
            out.pop()
        ps.append(tuple(out))
    return tuple(ps)


def _horner(p, u):
    acc = mpmath.mpf(0)
    for c in reversed(p):
        acc = acc * u + c
    return acc


def normalized_derivatives(name: str, x, n: int):
    """[rho^(k)(x) / k! for k = 0..n] via exact recurrences (mpmath, 80 digits)."""
    with mpmath.workdps(80):
        x = mpmath.mpf(x)
        if name == "gaussian":
            # d^k/dx^k e^{-x^2} = (-1)^k H_k(x) e^{-x^2}; carry H_k / k!
            e = mpmath.exp(-x * x)
            h = [mpmath.mpf(1), 2 * x]
            for k in range(1, n):
                h.append((2 * x * h[k] - 2 * h[k - 1]) / (k + 1))
            return [(-1) ** k * h[k] * e for k in range(n + 1)]
        if name in ("logistic", "tanh"):
            u = 1 / (1 + mpmath.exp(-x)) if name == "logistic" else mpmath.tanh(x)
            ps = _poly_derivatives(name, n)
            return [_horner(ps[k], u) / mpmath.factorial(k) for k in range(n + 1)]
        if name == "softplus":
            base = normalized_derivatives("logistic", x, max(n - 1, 0))
            out = [mpmath.log1p(mpmath.exp(x)) if x < 30 else x + mpmath.log1p(mpmath.exp(-x))]
            out += [base[k - 1] / k for k in range(1, n + 1)]
            return out
    raise ValueError(f"unknown activation {name!r}")


# --- catalog entries --------------------------------------------------------

def _gaussian_env(n):
    m = n // 2
    return 2.0 ** m / math.factorial(m)


def _logistic_env(n):
    r = 5 * math.pi / 6
    return 1 / (math.sin(r) * r ** n)


def _tanh_env(n):
    return 4 * (12 / (5 * math.pi)) ** n


def _softplus_env(n):
    r = 5 * math.pi / 6
    return 1 / (n * math.sin(r) * r ** (n - 1))


def _ramp(lo_val, hi_val):
    d = RAMP_DELTA
    return Pwl1D.from_knots([-d, d], [Fraction(lo_val), Fraction(hi_val)], 0, 0)


@dataclass(frozen=True)
class ActivationSpec:
    name: str
    alpha: float               # rho''(alpha) != 0
    deriv_point: float         # rho'(deriv_point) != 0; an inflection where available
    asymptotic_pwl: Pwl1D = field(repr=False)
    decay_rate: float          # |rho - l| <= decay_scale * exp(-decay_rate * |x|^decay_power)
    decay_scale: float
    decay_power: int
    envelope_fn: object = field(repr=False)

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        if self.name == "gaussian":
            return np.exp(-x * x)
        if self.name == "logistic":
            return expit(x)
        if self.name == "tanh":
            return np.tanh(x)
        return np.logaddexp(0.0, x)

    def mp(self, x):
        """Value at x in the current gmpy2 context."""
        if self.name == "gaussian":
            return gmpy2.exp(-x * x)
        if self.name == "logistic":
            return 1 / (1 + gmpy2.exp(-x))
        if self.name == "tanh":
            return gmpy2.tanh(x)
        return gmpy2.log1p(gmpy2.exp(x)) if x < 0 else x + gmpy2.log1p(gmpy2.exp(-x))

    def mp_derivatives(self, x):
        """(rho'(x), rho''(x)) in the current gmpy2 context."""
        if self.name == "gaussian":
            e = gmpy2.exp(-x * x)
            return -2 * x * e, (4 * x * x - 2) * e
        if self.name in ("logistic", "softplus"):
            s = 1 / (1 + gmpy2.exp(-x))
            d1 = s * (1 - s)
            d2 = d1 * (1 - 2 * s)
            return (d1, d2) if self.name == "logistic" else (s, d1)
        t = gmpy2.tanh(x)
        return 1 - t * t, -2 * t * (1 - t * t)

    def mp_point(self, which):
        """alpha or deriv_point as an mpfr in the current context."""
        if which == "alpha":
            return gmpy2.mpfr(self.alpha)
        if self.name == "gaussian":
            return -1 / gmpy2.sqrt(gmpy2.mpfr(2))
        return gmpy2.mpfr(self.deriv_point)

    def taylor_coeffs(self, center, n):
        """[rho^(k)(center)/k! for k = 0..n] as floats."""
        return [float(v) for v in normalized_derivatives(self.name, center, n)]

    def envelope(self, n: int) -> float:
        """Closed-form decay bound on sup_x |rho^(n)(x)| / n!, n >= 1."""
        return self.envelope_fn(n)

    def decay_bound(self, x):
        x = np.abs(np.asarray(x, dtype=float))
        return self.decay_scale * np.exp(-self.decay_rate * x ** self.decay_power)

    def far_field_radius(self, eps: float) -> float:
        """Smallest T with decay bound < eps for |x| >= T."""
        t = (math.log(self.decay_scale / eps) / self.decay_rate) ** (1 / self.decay_power)
        return max(t, 2 * float(RAMP_DELTA))

    def l_values(self, x):
        x = np.asarray(x, dtype=float)
        l = self.asymptotic_pwl
        out = np.empty_like(x)
        xs = [float(v) for v in l.breakpoints]
        ys = [float(v) for v in l.knot_values]
        sl = [float(v) for v in l.slopes]
        if not xs:
            return sl[0] * x + float(l(0))
        out = np.interp(x, xs, ys)
        out = np.where(x < xs[0], ys[0] + sl[0] * (x - xs[0]), out)
        out = np.where(x > xs[-1], ys[-1] + sl[-1] * (x - xs[-1]), out)
        return out


CATALOG_SPECS = {
    "gaussian": ActivationSpec("gaussian", 1.0, -1 / math.sqrt(2), Pwl1D.affine(0, 0), 1.0, 1.0, 2, _gaussian_env),
    "logistic": ActivationSpec("logistic", 1.0, 0.0, _ramp(0, 1), 1.0, 1.0, 1, _logistic_env),
    "tanh": ActivationSpec("tanh", 1.0, 0.0, _ramp(-1, 1), 2.0, 2.0, 1, _tanh_env),
    "softplus": ActivationSpec("softplus", 0.0, 0.0,
                               Pwl1D.from_knots([Fraction(0)], [Fraction(0)], 0, 1), 1.0, 1.0, 1, _softplus_env),
}


def get_activation(name: str) -> ActivationSpec:
    try:
        return CATALOG_SPECS[name]
    except KeyError:
        raise ValueError(f"{name!r} is not in the catalog {sorted(CATALOG_SPECS)}") from None


@dataclass
class CertificateReport:
    name: str
    n_max: int
    grid_size: int
    max_normalized: list      # sup over the grid of |rho^(n)|/n!, n = 1..n_max
    envelope: list
    rho0: float
    tail_max: float           # max |rho - l| / decay bound on the tail grid

    @property
    def ok(self) -> bool:
        return (abs(self.rho0) <= 1 and all(v <= 1 for v in self.max_normalized)
                and all(v <= e for v, e in zip(self.max_normalized, self.envelope)) and self.tail_max <= 1)


def certificate_check(act, n_max: int = N_MAX, grid=None, strict=True) -> CertificateReport:
    """Check |rho^(n)|/n! <= 1 and <= the closed-form envelope at grid points,
    and the decay of |rho - l| on a tail grid."""
    if isinstance(act, str):
        act = get_activation(act)
    if not 1 <= n_max <= N_MAX:
        raise ValueError(f"n_max must lie in [1, {N_MAX}]")
    if grid is None:
        grid = np.linspace(-12, 12, 481)
    mx = [0.0] * n_max
    for x in grid:
        vals = normalized_derivatives(act.name, float(x), n_max)
        for k in range(1, n_max + 1):
            mx[k - 1] = max(mx[k - 1], float(abs(vals[k])))
    env = [act.envelope(k) for k in range(1, n_max + 1)]
    tail = np.concatenate([np.linspace(-40, -2 * float(RAMP_DELTA), 2000), np.linspace(2 * float(RAMP_DELTA), 40, 2000)])
    lv = act.l_values(tail)
    # rounding of rho near l (e.g. 1 - logistic(37)) is not decay; discount a few ulps
    diff = np.maximum(np.abs(act.evaluate(tail) - lv) - 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(lv)), 0.0)
    ratio = diff / np.maximum(act.decay_bound(tail), 1e-300)
    rep = CertificateReport(act.name, n_max, len(grid), mx, env, float(act.evaluate(0.0)), float(ratio.max()))
    if strict and not rep.ok:
        bad = [k + 1 for k in range(n_max) if mx[k] > 1 or mx[k] > env[k]]
        raise CertificateViolation(f"{act.name}: derivative bound violated for n in {bad[:10]}; "
                                   f"rho(0) = {rep.rho0}; tail ratio {rep.tail_max}")
    return rep
