"""Closed-form region counts and upper bounds (big-integer arithmetic throughout)."""
from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field
from math import comb, factorial

VARIANTS = ("corrected", "verbatim", "previous")


def C(a: int, b: int) -> int:
    """Binomial with C(a, b) = 0 whenever a < 0, b < 0 or b > a."""
    if a < 0 or b < 0 or b > a:
        return 0
    return comb(a, b)


def _check_design(design):
    d = tuple(int(v) for v in design)
    if len(d) < 2 or any(v < 1 for v in d):
        raise ValueError(f"invalid design {design}: need length >= 2 and entries >= 1")
    return d


def r_exact_1d(design):
    """Maximal number of regions (R) and of non-constant regions (R~) for n_0 = 1."""
    d = _check_design(design)
    if d[0] != 1:
        raise ValueError("the exact formula is for one-dimensional input")
    hidden = d[1:-1]
    if any(n < 2 for n in hidden):
        raise ValueError("the exact formula needs every hidden width >= 2")
    R, prod = 1, 1
    for n in hidden:
        R += n * prod
        prod *= n + (n > 2)
    return R, prod


def zaslavsky_count(m: int, d: int) -> int:
    if m < 0 or d < 1:
        raise ValueError("need m >= 0 and d >= 1")
    return sum(C(m, i) for i in range(d + 1))


def one_hidden_layer_count(n0: int, n1: int) -> int:
    if n0 < 1 or n1 < 1:
        raise ValueError("need n0, n1 >= 1")
    return sum(C(n1, i) for i in range(min(n0, n1) + 1))


def f_jd(j: int, d: int, n: int) -> int:
    """Maximal number of one-layer regions with exactly j inactive neurons."""
    if j < 0 or d < 0 or n < 0:
        raise ValueError("need j, d, n >= 0")
    if j < d:
        return C(n, j)
    return C(n - 2 * j + 2 * d - 1, d - 1) + C(n - 2 * j + 2 * d - 2, d - 1)


@dataclass
class BoundBreakdown:
    design: tuple
    variant: str
    value: int = 0
    terms: list = field(default_factory=list)  # (j tuple, d tuple, factors, product)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["j-tuple", "d-tuple", "factor", "product"])
        for j, d, fac, prod in self.terms:
            w.writerow([" ".join(map(str, j)), " ".join(map(str, d)), "*".join(map(str, fac)), prod])
        return buf.getvalue()


def upper_bound_general(design, variant: str = "corrected") -> BoundBreakdown:
    """Upper bound on the region count, with its term-by-term breakdown.

    corrected  f_{j,d} factors for all but the last layer, binomials C(n_L, j)
               with j <= min(n_L, d_L) for the last one
    verbatim   f_{j,d} for every layer
    previous   the older bound, C(n_l, j_l) with j_l <= min(n_l, d_l) everywhere
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    d = _check_design(design)
    n0, hidden = d[0], d[1:-1]
    L = len(hidden)
    if L < 1:
        raise ValueError("need at least one hidden layer")
    out = BoundBreakdown(d, variant)

    def rec(l, dl, js, ds, facs, prod):
        if l == L:
            out.terms.append((tuple(js), tuple(ds), tuple(facs), prod))
            out.value += prod
            return
        n = hidden[l]
        last = l == L - 1
        if variant == "previous" or (variant == "corrected" and last):
            jmax = min(n, dl)
        else:
            jmax = (n + min(n, dl)) // 2
            if last:
                jmax = min(jmax, n, dl)
        for j in range(jmax + 1):
            if variant == "previous" or (variant == "corrected" and last):
                fac = C(n, j)
            else:
                fac = f_jd(j, dl, n)
            if fac == 0:
                continue
            rec(l + 1, min(dl, n - j), js + [j], ds + [dl], facs + [fac], prod * fac)

    rec(0, n0, [], [], [], 1)
    return out


def bottleneck_normalize(design):
    """Move width-2 hidden layers to the end, keeping the others in order."""
    d = _check_design(design)
    hidden = d[1:-1]
    if d[0] != 1 or any(n < 2 for n in hidden):
        raise ValueError("expects n_0 = 1 and hidden widths >= 2")
    return (d[0],) + tuple(n for n in hidden if n != 2) + tuple(n for n in hidden if n == 2) + (d[-1],)


def optimal_design(budget: int):
    """Best design among width-3 layers followed by k in {0, 1, 2} width-2 layers."""
    if budget < 2:
        raise ValueError("budget must be >= 2")
    best = None
    for k in (0, 1, 2):
        rest = budget - 2 * k
        if rest < 0 or rest % 3:
            continue
        design = (1,) + (3,) * (rest // 3) + (2,) * k + (1,)
        if len(design) == 2:
            continue
        R = r_exact_1d(design)[0]
        if best is None or R > best[1]:
            best = (design, R)
    if best is None:
        raise ValueError(f"no design of the family uses exactly {budget} neurons")
    return best


def optimal_design_formula(budget: int) -> int:
    """(2^(k+1) - 1) 4^(L-k) for the design returned by optimal_design."""
    design, _ = optimal_design(budget)
    hidden = design[1:-1]
    k = hidden.count(2)
    return (2 ** (k + 1) - 1) * 4 ** (len(hidden) - k)


def depth_efficiency_bound(N: int, L: int, n0: int) -> int:
    if min(N, L, n0) < 1:
        raise ValueError("all arguments must be >= 1")
    return (1 + N ** n0) ** L


def brute_force_activation_max(n: int, m: int) -> int:
    """Max over n points on a line with orientations of #regions with >= n - m active.

    Enumerates all n! * 2^n ordered orientation configurations.
    """
    best = 0
    for perm in itertools.permutations(range(n)):
        for orient in itertools.product((True, False), repeat=n):
            # point perm[i] sits at position i; orient True = active to the right
            cnt = 0
            for region in range(n + 1):  # region r lies between positions r-1 and r
                active = 0
                for pos in range(n):
                    right = orient[perm[pos]]
                    if (right and region > pos) or (not right and region <= pos):
                        active += 1
                if active >= n - m:
                    cnt += 1
            best = max(best, cnt)
    return best


def configurations(n: int) -> int:
    return factorial(n) * 2 ** n
