import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional

import pandas as pd
from tqdm import tqdm

from grouproulette.decimals import format_decimal
from grouproulette.distribution import AT_LEAST, AT_MOST, y_tail_exact
from grouproulette.enclosure import RealEnclosure, decide, euler, exp, log, refine, sign
from grouproulette.errors import DomainError

# Set up logging
logger = logging.getLogger("grouproulette.tails")

# Capture warnings and redirect them to the logging system
logging.captureWarnings(True)

LOWER_TAIL = "lower_tail"
UPPER_TAIL = "upper_tail"
DEFAULT_PRECISION = Fraction(1, 10**12)


@dataclass(frozen=True)
class BernoulliSumParams:
    """W = sum of n independent Bernoulli variables with E W = n p, deviation u"""

    n: int
    p: Fraction
    u: Fraction

    def __post_init__(self):
        object.__setattr__(self, "p", Fraction(self.p))
        object.__setattr__(self, "u", Fraction(self.u))
        if self.n < 1:
            raise DomainError(f"Need at least one Bernoulli summand, got n={self.n}")
        if not 0 <= self.p <= 1:
            raise DomainError(f"Mean fraction p must lie in [0, 1], got {self.p}")
        if self.u < 0:
            raise DomainError(f"Deviation u must be nonnegative, got {self.u}")


def _check_side(side: str):
    if side not in (LOWER_TAIL, UPPER_TAIL):
        raise DomainError(f"side must be '{LOWER_TAIL}' or '{UPPER_TAIL}', got {side}")


def janson_bound(*, params: BernoulliSumParams, side: str, precision: Fraction = DEFAULT_PRECISION) -> RealEnclosure:
    """Enclosure of exp(-u^2 / (2 (n p (1-p) -+ u (1-2p)/3)))

    The minus sign bounds P(W <= E W - u), the plus sign P(W >= E W + u).

    Args:
        params (BernoulliSumParams): n, p and u
        side (str): "lower_tail" or "upper_tail"
        precision (Fraction): target width of the enclosure

    Raises:
        DomainError: the denominator is not positive, so the bound does not apply

    Returns:
        RealEnclosure: enclosure of the bound
    """
    _check_side(side)
    if params.u == 0:
        return RealEnclosure.exact(1)
    n, p, u = params.n, params.p, params.u
    correction = u * (1 - 2 * p) / 3
    denominator = n * p * (1 - p) - correction if side == LOWER_TAIL else n * p * (1 - p) + correction
    if denominator <= 0:
        logger.warning(f"Janson bound inapplicable: denominator {denominator} for {params} on the {side}")
        raise DomainError(f"Janson bound needs a positive denominator, got {denominator}")
    exponent = -(u * u) / (2 * denominator)
    return refine(lambda bits: exp(exponent, bits=bits), precision=precision)


def y_bernoulli_params(*, n: int, u: Fraction) -> BernoulliSumParams:
    """Janson parameters for Y_n seen as a sum of n-2 Bernoulli variables with the exact mean"""
    if n < 3:
        raise DomainError(f"Y_n is a nontrivial Bernoulli sum only for n >= 3, got n={n}")
    return BernoulliSumParams(n=n - 2, p=expected_empty(n=n) / (n - 2), u=Fraction(u))


def y_tail_bound(*, n: int, u: Fraction, side: str, precision: Fraction = DEFAULT_PRECISION) -> RealEnclosure:
    """Closed-form tail bounds for Y_n, n >= 4

    lower side: P(Y_n <= (n-5/3)/e - u) <= exp(-e^2 u^2 / (2 (n-1)(e-1)))
    upper side: P(Y_n >= (n-3/2)/e + u) <= exp(-e^2 u^2 / (2 ((n-1)(e-1) + u e (e-2)/3)))

    Args:
        n (int): index of Y_n, n >= 4
        u (Fraction): deviation, u >= 0
        side (str): "lower_tail" or "upper_tail"
        precision (Fraction): target width of the enclosure

    Raises:
        DomainError: n < 4 or u < 0

    Returns:
        RealEnclosure: enclosure of the bound
    """
    _check_side(side)
    u = Fraction(u)
    if n < 4:
        logger.warning(f"Tail bound for Y_{n} requested; it needs n >= 4")
        raise DomainError(f"Tail bounds for Y_n need n >= 4, got n={n}")
    if u < 0:
        raise DomainError(f"Deviation u must be nonnegative, got {u}")
    if u == 0:
        return RealEnclosure.exact(1)

    def compute(bits: int) -> RealEnclosure:
        e = euler(bits=bits)
        denominator = (n - 1) * (e - 1)
        if side == UPPER_TAIL:
            denominator = denominator + u * e * (e - 2) / 3
        return exp(-(e * e * (u * u)) / (2 * denominator), bits=bits)

    return refine(compute, precision=precision)


def y_tail_threshold(*, n: int, u: Fraction, side: str, bits: int) -> RealEnclosure:
    """(n-5/3)/e - u for the lower side, (n-3/2)/e + u for the upper side"""
    e = euler(bits=bits)
    if side == LOWER_TAIL:
        return (n - Fraction(5, 3)) / e - Fraction(u)
    return (n - Fraction(3, 2)) / e + Fraction(u)


def expected_empty(*, n: int) -> Fraction:
    """E Y_n = (n-1) (1 - 1/(n-1))^(n-1), exactly"""
    if n < 2:
        raise DomainError(f"Y_n is defined for n >= 2, got n={n}")
    return Fraction((n - 2) ** (n - 1), (n - 1) ** (n - 2))


def expected_empty_sandwich(*, n: int) -> bool:
    """Checks (n-5/3)/e <= E Y_n <= (n-3/2)/e by enclosures of e"""
    if n < 4:
        raise DomainError(f"The expectation sandwich needs n >= 4, got n={n}")
    mean = expected_empty(n=n)
    above = sign(lambda bits: mean - (n - Fraction(5, 3)) / euler(bits=bits)) > 0
    below = sign(lambda bits: (n - Fraction(3, 2)) / euler(bits=bits) - mean) > 0
    if not (above and below):
        logger.warning(f"E Y_{n} = {float(mean):.6f} outside its sandwich")
    return above and below


def u_inequality_check(*, u_grid: Iterable[Fraction]) -> bool:
    """Checks (1-u/2-u^2/2)/e <= (1-u)^(1/u) <= (1-u/2)/e at each grid point of (0, 1)

    Args:
        u_grid (Iterable[Fraction]): points strictly inside (0, 1)

    Raises:
        DomainError: a grid point lies outside (0, 1)

    Returns:
        bool: True if every inequality holds (vacuously True for an empty grid)
    """
    grid = [Fraction(u) for u in u_grid]
    outside = [u for u in grid if not 0 < u < 1]
    if outside:
        logger.warning(f"Grid points outside (0, 1): {outside[:5]}")
        raise DomainError(f"u_grid must lie strictly inside (0, 1), got {outside[0]}")

    passed = True
    for u in grid:
        def root(bits: int, u=u) -> RealEnclosure:
            return exp(log(1 - u, bits=bits) / u, bits=bits)

        upper_ok = sign(lambda bits, u=u: (1 - u / 2) / euler(bits=bits) - root(bits)) > 0
        lower_ok = sign(lambda bits, u=u: root(bits) - (1 - u / 2 - u * u / 2) / euler(bits=bits)) > 0
        if not (upper_ok and lower_ok):
            logger.warning(f"Inequality failed at u={u}: upper {upper_ok}, lower {lower_ok}")
            passed = False
    return passed


def domination_report(*, n_min: int = 4, n_max: int = 60, precision: Fraction = DEFAULT_PRECISION,
                      quiet: bool = False) -> pd.DataFrame:
    """Compares exact tails of Y_n with the closed-form bounds for every applicable integer u

    A lower-side row is applicable while (n-5/3)/e - u >= 0, an upper-side row while
    (n-3/2)/e + u <= n-2. Thresholds are turned into integer tail cut-offs by
    enclosure-decided floors and ceilings.

    Returns:
        pd.DataFrame: columns n, u, side, exact_tail, bound_hi, verdict
    """
    if n_min < 4 or n_max < n_min:
        raise DomainError(f"Need 4 <= n_min <= n_max, got {n_min}..{n_max}")

    rows = []
    for n in tqdm(range(n_min, n_max + 1), desc="Tail domination", disable=quiet):
        for side in (LOWER_TAIL, UPPER_TAIL):
            u = 0
            while True:
                if side == LOWER_TAIL:
                    cut = decide(lambda bits, u=u: y_tail_threshold(n=n, u=u, side=side, bits=bits), "floor")
                    if cut < 0:
                        break
                    exact_tail = y_tail_exact(n=n, k=cut, direction=AT_MOST)
                else:
                    cut = decide(lambda bits, u=u: y_tail_threshold(n=n, u=u, side=side, bits=bits), "ceil")
                    if cut > n - 2:
                        break
                    # the threshold is positive, so cut >= 1
                    exact_tail = y_tail_exact(n=n, k=cut, direction=AT_LEAST)
                bound = y_tail_bound(n=n, u=u, side=side, precision=precision)
                verdict = "ok" if exact_tail <= bound.hi else "violated"
                if verdict != "ok":
                    logger.warning(f"Tail bound violated at n={n}, u={u}, {side}")
                rows.append({
                    "n": n,
                    "u": u,
                    "side": side,
                    "exact_tail": format_decimal(value=exact_tail, places=12, direction="up"),
                    "bound_hi": format_decimal(value=bound.hi, places=12, direction="up"),
                    "verdict": verdict,
                })
                u += 1
    return pd.DataFrame(rows, columns=["n", "u", "side", "exact_tail", "bound_hi", "verdict"])


def first_violation(report: pd.DataFrame) -> Optional[dict]:
    """First violated row of a domination report, if any"""
    violated = report[report["verdict"] != "ok"]
    return None if violated.empty else violated.iloc[0].to_dict()
