import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterator, List, Tuple

import gmpy2
import pandas as pd
from gmpy2 import mpz

from grouproulette.decimals import format_decimal
from grouproulette.errors import DomainError

# Set up logging
logger = logging.getLogger("grouproulette.distribution")

# Capture warnings and redirect them to the logging system
logging.captureWarnings(True)

DEFAULT_SCALE = 10**10
AT_LEAST = "at_least"
AT_MOST = "at_most"


@dataclass(frozen=True, eq=True)
class Pmf:
    """Exact pmf stored as integer numerators over one common denominator.

    Only outcomes with positive mass are kept, so `support` lists exactly the
    values the variable can take.
    """

    numerators: Dict[int, int]
    denominator: int

    def __post_init__(self):
        cleaned = {int(k): int(v) for k, v in self.numerators.items() if v != 0}
        object.__setattr__(self, "numerators", dict(sorted(cleaned.items())))
        object.__setattr__(self, "denominator", int(self.denominator))
        if self.denominator <= 0:
            raise DomainError(f"Pmf denominator must be positive, got {self.denominator}")
        if any(v < 0 for v in self.numerators.values()):
            raise DomainError("Pmf has a negative mass")
        if sum(self.numerators.values()) != self.denominator:
            raise DomainError("Pmf masses do not sum to 1")

    @property
    def support(self) -> List[int]:
        return list(self.numerators)

    def mass(self, outcome: int) -> Fraction:
        return Fraction(self.numerators.get(outcome, 0), self.denominator)

    __getitem__ = mass

    def items(self) -> Iterator[Tuple[int, Fraction]]:
        for outcome in self.numerators:
            yield outcome, self.mass(outcome)

    def total(self) -> Fraction:
        return Fraction(sum(self.numerators.values()), self.denominator)

    def at_least(self, k: int) -> Fraction:
        return Fraction(sum(v for o, v in self.numerators.items() if o >= k), self.denominator)

    def at_most(self, k: int) -> Fraction:
        return Fraction(sum(v for o, v in self.numerators.items() if o <= k), self.denominator)

    def mean(self) -> Fraction:
        return Fraction(sum(o * v for o, v in self.numerators.items()), self.denominator)

    def shifted(self, offset: int) -> "Pmf":
        return Pmf({o + offset: v for o, v in self.numerators.items()}, self.denominator)


@dataclass(frozen=True)
class TruncatedTerm:
    """One inclusion-exclusion term t^n_{k,r} of P(S_n = k)"""

    n: int
    k: int
    r: int
    value: int


@dataclass(frozen=True)
class ScaledProb:
    """One-sided probability bound m/scale"""

    m: int
    scale: int = DEFAULT_SCALE

    def __post_init__(self):
        if self.scale <= 0:
            raise DomainError(f"Scale must be positive, got {self.scale}")
        if not 0 <= self.m <= self.scale:
            raise DomainError(f"Scaled probability {self.m}/{self.scale} outside [0, 1]")

    def as_fraction(self) -> Fraction:
        return Fraction(self.m, self.scale)


class SurvivorTerms:
    """Inclusion-exclusion terms of P(S_n = k) for one fixed n.

    With a = n-k-r, t^n_{k,r} = C(n,k) C(n-k,r) a^(n-a) (a-1)^a, so the power
    factor depends on a only and is shared by every k. Powers are memoized
    per instance; the instance is owned by a single caller.

    Args:
        n (int): number of people, n >= 2
    """

    def __init__(self, n: int):
        if n < 2:
            raise DomainError(f"S_n is defined for n >= 2, got n={n}")
        self.n = n
        self.denominator = mpz(n - 1) ** n
        self._powers: Dict[int, mpz] = {}

    def power(self, a: int) -> mpz:
        # a <= 1 vanishes: 1^(n-1) * 0^1 and 0^n * (-1)^0
        if a <= 1:
            return mpz(0)
        cached = self._powers.get(a)
        if cached is None:
            cached = mpz(a) ** (self.n - a) * mpz(a - 1) ** a
            self._powers[a] = cached
        return cached

    def iter_terms(self, k: int) -> Iterator[Tuple[int, mpz]]:
        """Yields (r, t^n_{k,r}) for r = 0, 1, ... while n-k-r >= 0"""
        n = self.n
        coef = gmpy2.comb(n, k)
        for r in range(n - k + 1):
            yield r, coef * self.power(n - k - r)
            coef = coef * (n - k - r) // (r + 1)

    def term(self, k: int, r: int) -> TruncatedTerm:
        n = self.n
        if r > n - k:
            return TruncatedTerm(n, k, r, 0)
        value = gmpy2.comb(n, k) * gmpy2.comb(n - k, r) * self.power(n - k - r)
        return TruncatedTerm(n, k, r, int(value))

    def exact_numerator(self, k: int) -> int:
        """(n-1)^n P(S_n = k), the full alternating sum"""
        total = mpz(0)
        for r, t in self.iter_terms(k):
            total += -t if r & 1 else t
        return int(total)

    def lower_scaled(self, k: int, scale: int) -> int:
        """P_{n,k}: floor of scale times the Bonferroni truncation after 2 r_max terms, clamped at 0.

        r_max is the first r with scale * t^n_{k,2r} < (n-1)^n, so the truncation error is below
        1/scale and the floor adds less than another 1/scale.
        """
        total = mpz(0)
        terms = self.iter_terms(k)
        for r, t in terms:
            # r is even here
            if scale * t < self.denominator:
                break
            total += t
            _, t_odd = next(terms, (r + 1, mpz(0)))
            total -= t_odd
        m = (scale * total) // self.denominator
        return max(0, int(m))


def _check_k(n: int, k: int):
    if not 0 <= k <= n - 2:
        logger.warning(f"k={k} outside 0..{n - 2} for n={n}")
        raise DomainError(f"k must lie in 0..{n - 2} for n={n}, got k={k}")


def s_pmf_exact(*, n: int) -> Pmf:
    """Exact pmf of the one-round survivor count S_n

    Args:
        n (int): number of people, n >= 2

    Raises:
        DomainError: n < 2

    Returns:
        Pmf: numerators over the common denominator (n-1)^n
    """
    if n < 2:
        logger.warning(f"S_n requested for n={n}")
        raise DomainError(f"S_n is defined for n >= 2, got n={n}")
    terms = SurvivorTerms(n)
    numerators = {k: terms.exact_numerator(k) for k in range(n - 1)}
    return Pmf(numerators, int(terms.denominator))


def s_pmf_lower_scaled(*, n: int, k: int, scale: int = DEFAULT_SCALE) -> ScaledProb:
    """Certified lower bound P_{n,k}/scale on P(S_n = k)

    Args:
        n (int): number of people, n >= 2
        k (int): survivor count, 0 <= k <= n-2
        scale (int): denominator of the bound

    Raises:
        DomainError: n < 2, or k outside 0..n-2

    Returns:
        ScaledProb: P_{n,k}/scale <= P(S_n = k) < (P_{n,k} + 2)/scale
    """
    if n < 2:
        raise DomainError(f"S_n is defined for n >= 2, got n={n}")
    _check_k(n, k)
    return ScaledProb(SurvivorTerms(n).lower_scaled(k, scale), scale)


def empty_boxes_pmf(*, balls: int, boxes: int) -> Pmf:
    """Exact pmf of the number of empty boxes after throwing balls uniformly into boxes

    Args:
        balls (int): number of balls, >= 0
        boxes (int): number of boxes, >= 1

    Raises:
        DomainError: boxes < 1 or balls < 0

    Returns:
        Pmf: numerators over boxes^balls
    """
    if boxes < 1 or balls < 0:
        logger.warning(f"Invalid occupancy problem: balls={balls}, boxes={boxes}")
        raise DomainError(f"Need balls >= 0 and boxes >= 1, got balls={balls}, boxes={boxes}")

    numerators = {}
    for j in range(boxes + 1):
        free = boxes - j
        total = mpz(0)
        coef = mpz(1)
        for r in range(free + 1):
            # Python and gmpy2 both use 0**0 == 1
            t = coef * mpz(free - r) ** balls
            total += -t if r & 1 else t
            coef = coef * (free - r) // (r + 1)
        numerators[j] = int(gmpy2.comb(boxes, j) * total)
    return Pmf(numerators, boxes**balls)


def y_pmf(*, n: int) -> Pmf:
    """Pmf of Y_n: empty boxes after n-1 balls into n-1 boxes"""
    if n < 2:
        raise DomainError(f"Y_n is defined for n >= 2, got n={n}")
    return empty_boxes_pmf(balls=n - 1, boxes=n - 1)


def z_pmf(*, n: int) -> Pmf:
    """Pmf of Z_n: one plus the empty boxes after n balls into n-1 boxes"""
    if n < 2:
        raise DomainError(f"Z_n is defined for n >= 2, got n={n}")
    return empty_boxes_pmf(balls=n, boxes=n - 1).shifted(1)


def y_tail_exact(*, n: int, k: int, direction: str) -> Fraction:
    """Exact tail P(Y_n >= k) or P(Y_n <= k) from the integer-term closed forms

    With m = n-1 balls and boxes,
    P(Y_n >= k) = m^-m sum_r (-1)^r C(m,k+r) C(k+r-1,r) (m-k-r)^m            (k >= 1)
    P(Y_n <= k) = 1 + m^-m sum_r (-1)^r C(m,k+r) C(k+r-1,r-1) (m-k-r)^m      (k >= 0)
    for r = 0..m-k.

    Args:
        n (int): index of Y_n, n >= 2
        k (int): threshold
        direction (str): "at_least" or "at_most"

    Raises:
        DomainError: n < 2, unknown direction, k < 1 with at_least or k < 0 with at_most

    Returns:
        Fraction: the exact tail probability
    """
    if n < 2:
        raise DomainError(f"Y_n is defined for n >= 2, got n={n}")
    if direction == AT_LEAST and k < 1:
        logger.warning(f"at_least tail requested with k={k}")
        raise DomainError(f"at_least tails need k >= 1, got k={k}")
    if direction == AT_MOST and k < 0:
        raise DomainError(f"at_most tails need k >= 0, got k={k}")
    if direction not in (AT_LEAST, AT_MOST):
        raise DomainError(f"direction must be '{AT_LEAST}' or '{AT_MOST}', got {direction}")

    m = n - 1
    denominator = mpz(m) ** m
    if k > m:
        return Fraction(0) if direction == AT_LEAST else Fraction(1)

    total = mpz(0)
    if direction == AT_LEAST:
        coef = gmpy2.comb(m, k)  # C(m,k) C(k-1,0)
        start = 0
    else:
        coef = gmpy2.comb(m, k + 1) if k + 1 <= m else mpz(0)  # C(m,k+1) C(k,0), the r=1 term
        start = 1
    for r in range(start, m - k + 1):
        if coef == 0:
            break
        t = coef * mpz(m - k - r) ** m
        total += -t if r & 1 else t
        if direction == AT_LEAST:
            coef = coef * (m - k - r) * (k + r) // ((k + r + 1) * (r + 1))
        else:
            coef = coef * (m - k - r) * (k + r) // ((k + r + 1) * r)

    if direction == AT_MOST:
        total += denominator
    return Fraction(int(total), int(denominator))


def interval_exit_bound(*, a: int, b: int, alpha: int, beta: int) -> Fraction:
    """Exact P(Y_a <= alpha-1) + P(Y_b >= beta)

    Under the coupling this bounds the probability that S_n leaves [alpha, beta]
    for some n in [a, b].
    """
    if not 2 <= a <= b:
        raise DomainError(f"Need 2 <= a <= b, got a={a}, b={b}")
    if alpha > beta:
        raise DomainError(f"Need alpha <= beta, got alpha={alpha}, beta={beta}")
    low = y_tail_exact(n=a, k=alpha - 1, direction=AT_MOST) if alpha >= 1 else Fraction(0)
    high = y_tail_exact(n=b, k=beta, direction=AT_LEAST) if beta >= 1 else Fraction(1)
    return low + high


def stirling2(*, i: int, k: int) -> int:
    """Stirling number of the second kind S(i, k)

    Args:
        i (int): set size, >= 0
        k (int): number of blocks, >= 0

    Returns:
        int: number of partitions of an i-set into k non-empty blocks
    """
    if i < 0 or k < 0:
        raise DomainError(f"Stirling numbers need i, k >= 0, got i={i}, k={k}")
    if k > i:
        return 0
    total = mpz(0)
    coef = mpz(1)
    for j in range(k + 1):
        t = coef * mpz(k - j) ** i
        total += -t if j & 1 else t
        coef = coef * (k - j) // (j + 1)
    return int(total // gmpy2.fac(k))


def pmf_frame(pmf: Pmf) -> pd.DataFrame:
    """CSV-ready table with columns outcome, numerator, denominator (common denominator)"""
    return pd.DataFrame({
        "outcome": pmf.support,
        "numerator": [str(pmf.numerators[o]) for o in pmf.support],
        "denominator": [str(pmf.denominator)] * len(pmf.support),
    })


def pmf_decimal_frame(pmf: Pmf, *, places: int = 10, direction: str = "down") -> pd.DataFrame:
    """Masses as decimal strings with an explicit rounding direction column"""
    return pd.DataFrame({
        "outcome": pmf.support,
        "mass": [format_decimal(value=pmf.mass(o), places=places, direction=direction) for o in pmf.support],
        "rounding": [direction] * len(pmf.support),
    })


__all__ = [
    "AT_LEAST",
    "AT_MOST",
    "DEFAULT_SCALE",
    "Pmf",
    "ScaledProb",
    "SurvivorTerms",
    "TruncatedTerm",
    "empty_boxes_pmf",
    "interval_exit_bound",
    "pmf_decimal_frame",
    "pmf_frame",
    "s_pmf_exact",
    "s_pmf_lower_scaled",
    "stirling2",
    "y_pmf",
    "y_tail_exact",
    "z_pmf",
]
