"""Shared fixtures and generators for the tests."""
import random
from fractions import Fraction

from relux.core import Pwl1D, make_network

# one summary line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES = []


def h_network():
    """h(x) = 1 - relu(1 - 3x) - relu(3x - 1) + relu(6x - 4)."""
    return make_network([([[-3], [3], [6]], [1, -1, -4]), ([[-1, -1, 1]], [1])])


def g2_network():
    """g_2(x) = 1 - relu(-3x + 1) - relu(3x - 2)."""
    return make_network([([[-3], [3]], [1, -2]), ([[-1, -1]], [1])])


def random_pwl(rng: random.Random, k: int, bound=100) -> Pwl1D:
    """Canonical PWL with exactly k pieces, rationals with |numerator|, denominator <= bound."""
    def q():
        return Fraction(rng.randint(-bound, bound), rng.randint(1, bound))
    xs = sorted({q() for _ in range(4 * k)})
    while len(xs) < k - 1:
        xs = sorted(set(xs) | {q()})
    xs = sorted(rng.sample(xs, k - 1))
    slopes = [q()]
    while len(slopes) < k:
        s = q()
        if s != slopes[-1]:
            slopes.append(s)
    anchor = (xs[0] if xs else Fraction(0), q())
    return Pwl1D(xs, slopes, anchor)
