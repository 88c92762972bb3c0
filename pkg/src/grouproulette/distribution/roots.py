"""Real-rootedness of the probability generating polynomial of Y_n.

E[z^{Y_n}] is proportional to G(z) = R(z - 1) with
R(z) = sum_k C(n-1, k) (n-k-1)^(n-1) z^k. When G has only real (hence
nonpositive) roots, Y_n is a sum of independent Bernoulli variables, which
is what the Janson-type tail bounds need.
"""
import logging
from fractions import Fraction
from typing import List

import sympy
from sympy import Poly, Rational, binomial, symbols

from grouproulette import get_settings
from grouproulette.enclosure import RealEnclosure
from grouproulette.errors import DomainError

logger = logging.getLogger("grouproulette.distribution.roots")
logging.captureWarnings(True)

z = symbols("z")
N_SMALL = get_settings()["n_small_poly"]


def y_generating_poly(*, n: int) -> Poly:
    """G(z) = R(z-1), an integer polynomial of degree n-2"""
    r_poly = Poly(sum(binomial(n - 1, k) * sympy.Integer(n - k - 1) ** (n - 1) * z**k for k in range(n)), z, domain="ZZ")
    return r_poly.shift(-1)


def _sign(value) -> int:
    # sympy comparisons give BooleanAtoms, which do not subtract
    return int(sympy.sign(value))


def _sign_changes(signs: List[int]) -> int:
    nonzero = [s for s in signs if s != 0]
    return sum(1 for a, b in zip(nonzero, nonzero[1:]) if a != b)


def count_real_roots(poly: Poly) -> int:
    """Number of distinct real roots from the Sturm sequence signs at -inf and +inf"""
    sequence = sympy.sturm(poly)
    at_pos_inf = [_sign(p.LC()) for p in sequence]
    at_neg_inf = [_sign(p.LC()) * (-1) ** p.degree() for p in sequence]
    return _sign_changes(at_neg_inf) - _sign_changes(at_pos_inf)


def y_generating_poly_real_rooted(*, n: int, n_small: int = N_SMALL) -> bool:
    """Decides whether the generating polynomial of Y_n has only real roots

    Args:
        n (int): index of Y_n, 3 <= n <= n_small
        n_small (int): largest n accepted

    Raises:
        DomainError: n outside 3..n_small, or the polynomial is identically zero

    Returns:
        bool: True when every root of G is real
    """
    if not 3 <= n <= n_small:
        logger.warning(f"Real-rootedness requested for n={n} outside 3..{n_small}")
        raise DomainError(f"n must lie in 3..{n_small}, got n={n}")
    poly = y_generating_poly(n=n)
    if poly.is_zero:
        raise DomainError(f"Generating polynomial of Y_{n} is identically zero")

    # distinct real roots of G equal the real roots of its squarefree part
    squarefree = poly.sqf_part()
    distinct = count_real_roots(squarefree)
    real_rooted = distinct == squarefree.degree()
    logger.info(f"Y_{n}: degree {poly.degree()}, {distinct} distinct real roots, real-rooted={real_rooted}")
    return real_rooted


def y_bernoulli_decomposition(*, n: int, precision: Fraction = Fraction(1, 10**12), n_small: int = N_SMALL) -> List[RealEnclosure]:
    """Bernoulli success probabilities p_i with Y_n = sum of independent Bernoulli(p_i)

    A root -d of G gives the factor (z + d)/(1 + d), the pgf of Bernoulli(1/(1 + d)).

    Args:
        n (int): index of Y_n, 3 <= n <= n_small
        precision (Fraction): width of each returned enclosure
        n_small (int): largest n accepted

    Raises:
        DomainError: the polynomial is not real-rooted

    Returns:
        List[RealEnclosure]: one enclosure per root, counted with multiplicity, sorted by midpoint
    """
    if not y_generating_poly_real_rooted(n=n, n_small=n_small):
        raise DomainError(f"Y_{n} is not a Bernoulli sum: its generating polynomial has non-real roots")
    poly = y_generating_poly(n=n)
    eps = Rational(precision.numerator, precision.denominator) / 2
    probabilities = []
    for (a, b), multiplicity in poly.intervals(eps=eps):
        a = Fraction(int(a.p), int(a.q))
        b = Fraction(int(b.p), int(b.q))
        # root in [a, b], d = -root; 1/(1+d) is increasing in the root
        enclosure = RealEnclosure(1 / (1 - a), min(Fraction(1), 1 / (1 - b)))
        probabilities.extend([enclosure] * multiplicity)
    return sorted(probabilities, key=lambda e: e.midpoint)
