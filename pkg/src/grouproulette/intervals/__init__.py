"""Interval sequences I_k, the hill and valley tables, and the J_k / I_k(x) families.

Given real I0_minus < I0_plus < e I0_minus and gamma in (0, 1],

    c0    = (sqrt(I0_plus) - sqrt(I0_minus)) gamma / (s0 sqrt(e))
    I_k^- = I0_minus e^k (1 + c0 sqrt(e / I0_minus) sigma_k)
    I_k^+ = I0_plus  e^k (1 - c0 sqrt(e / I0_plus)  sigma_k)

with sigma_k = sum_{i<=k} sqrt(i) e^{-i/2} and s0 = sigma_inf. The integer
intervals are I_k = [floor(I_k^-), ceil(I_k^+)]; every floor and ceiling is
decided from enclosures, never guessed.
"""
import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, List, Optional, Tuple

import pandas as pd

from grouproulette import get_settings
from grouproulette.enclosure import (
    CAP_WIDTH_BITS,
    DEFAULT_BITS,
    MAX_BITS,
    START_BITS,
    RealEnclosure,
    decide,
    euler,
    exp,
    refine,
    sign,
    sqrt,
)
from grouproulette.errors import DomainError, EnclosureError, UndecidableRoundingError

# Set up logging
logger = logging.getLogger("grouproulette.intervals")

# Capture warnings and redirect them to the logging system
logging.captureWarnings(True)

_settings = get_settings()
HILLS: Tuple[Tuple[int, int], ...] = tuple(tuple(h) for h in _settings["hills"])
VALLEYS: Tuple[Tuple[int, int], ...] = tuple(tuple(v) for v in _settings["valleys"])
DEFAULT_PRECISION = Fraction(1, 10**12)

Endpoints = Callable[[int], Tuple[RealEnclosure, RealEnclosure]]


@lru_cache(maxsize=32)
def _sqrt_exp_sums(K: int, bits: int) -> Tuple[RealEnclosure, ...]:
    """sigma_0..sigma_K enclosures, sigma_k = sum_{i=1}^k sqrt(i) e^{-i/2}"""
    half = exp(Fraction(-1, 2), bits=bits + 16)
    power = RealEnclosure.exact(1)
    total = RealEnclosure.exact(0)
    sums = [total]
    for i in range(1, K + 1):
        power = (power * half).rounded(bits + 16)
        total = (total + sqrt(i, bits=bits + 16) * power).rounded(bits + 16)
        sums.append(total)
    return tuple(sums)


@lru_cache(maxsize=32)
def _s0_at(bits: int) -> RealEnclosure:
    # sqrt(i) <= e^{i/4}, so the tail after K terms is at most e^{-(K+1)/4} / (1 - e^{-1/4})
    K = 4 * (bits + 8)
    partial = _sqrt_exp_sums(K, bits)[-1]
    tail = exp(Fraction(-(K + 1), 4), bits=bits + 16) / (1 - exp(Fraction(-1, 4), bits=bits + 16))
    return RealEnclosure(partial.lo, partial.hi + tail.hi).rounded(bits)


def s0_enclosure(*, precision: Fraction = DEFAULT_PRECISION) -> RealEnclosure:
    """Enclosure of s0 = sum_{i>=1} sqrt(i) e^{-i/2} = 2.3124494...

    Raises:
        EnclosureError: the width target is not met within the precision cap
    """
    return refine(_s0_at, precision=precision)


@dataclass(frozen=True)
class IntervalSeqParams:
    """Starting interval [I0_minus, I0_plus] and the spread parameter gamma"""

    I0_minus: Fraction
    I0_plus: Fraction
    gamma: Fraction = Fraction(1)

    def __post_init__(self):
        for name in ("I0_minus", "I0_plus", "gamma"):
            object.__setattr__(self, name, Fraction(getattr(self, name)))
        if self.I0_minus < 2 or self.I0_plus < self.I0_minus:
            logger.warning(f"Invalid starting interval [{self.I0_minus}, {self.I0_plus}]")
            raise DomainError(f"Need 2 <= I0_minus <= I0_plus, got [{self.I0_minus}, {self.I0_plus}]")
        if not 0 < self.gamma <= 1:
            raise DomainError(f"gamma must lie in (0, 1], got {self.gamma}")
        if sign(lambda bits: euler(bits=bits) * self.I0_minus - self.I0_plus) < 0:
            raise DomainError(f"Need I0_plus < e I0_minus, got [{self.I0_minus}, {self.I0_plus}]")

    def endpoints(self, bits: int) -> Tuple[RealEnclosure, RealEnclosure]:
        return RealEnclosure.exact(self.I0_minus), RealEnclosure.exact(self.I0_plus)


@dataclass(frozen=True)
class IntervalSeq:
    """Integer intervals I_0..I_K with the constants of the visit bound

    minus and plus hold enclosures of the real endpoints I_k^- and I_k^+.
    """

    gamma: Fraction
    s0: RealEnclosure
    c0: RealEnclosure
    c1: RealEnclosure
    c2: Optional[RealEnclosure]
    intervals: Tuple[Tuple[int, int], ...]
    minus: Tuple[RealEnclosure, ...]
    plus: Tuple[RealEnclosure, ...]
    params: Optional[IntervalSeqParams] = None

    @property
    def K(self) -> int:
        return len(self.intervals) - 1

    def disjoint(self) -> bool:
        return all(hi < nxt_lo for (_, hi), (nxt_lo, _) in zip(self.intervals, self.intervals[1:]))

    def length_bound_holds(self) -> List[bool]:
        """length(I_k) >= (I0_plus - I0_minus) e^{k/2} for each k; the bound is stated for gamma = 1"""
        if self.params is None:
            raise DomainError("The length bound needs rational starting endpoints")
        spread = self.params.I0_plus - self.params.I0_minus
        results = []
        for k, (lo, hi) in enumerate(self.intervals):
            length = hi - lo
            if k == 0:
                results.append(length >= spread)
            else:
                results.append(sign(lambda bits, k=k, length=length: length - spread * exp(Fraction(k, 2), bits=bits)) > 0)
        return results


def _constants(i0_minus: RealEnclosure, i0_plus: RealEnclosure, gamma: Fraction, bits: int):
    e = euler(bits=bits)
    root_e = sqrt(e, bits=bits)
    s0 = _s0_at(bits)
    root_minus = sqrt(i0_minus, bits=bits)
    root_plus = sqrt(i0_plus, bits=bits)
    c0 = ((root_plus - root_minus) * gamma / (s0 * root_e)).rounded(bits)
    return e, root_e, s0, root_minus, root_plus, c0


def _endpoint_enclosures(endpoints: Endpoints, gamma: Fraction, K: int, bits: int):
    i0_minus, i0_plus = endpoints(bits)
    e, root_e, _, root_minus, root_plus, c0 = _constants(i0_minus, i0_plus, gamma, bits)
    sums = _sqrt_exp_sums(K, bits)
    step_minus = (c0 * root_e / root_minus).rounded(bits + 16)
    step_plus = (c0 * root_e / root_plus).rounded(bits + 16)
    minus, plus = [], []
    growth = RealEnclosure.exact(1)
    for k in range(K + 1):
        minus.append((i0_minus * growth * (1 + step_minus * sums[k])).rounded(bits))
        plus.append((i0_plus * growth * (1 - step_plus * sums[k])).rounded(bits))
        growth = (growth * e).rounded(bits + 16)
    return minus, plus


def _resolve_intervals(endpoints: Endpoints, gamma: Fraction, K: int):
    """floor(I_k^-) and ceil(I_k^+) for k = 0..K, escalating precision until every rounding is decided"""
    floors: List[Optional[int]] = [None] * (K + 1)
    ceilings: List[Optional[int]] = [None] * (K + 1)
    width_cap = Fraction(1, 1 << CAP_WIDTH_BITS)
    bits = START_BITS
    while True:
        minus, plus = _endpoint_enclosures(endpoints, gamma, K, bits)
        stuck = []
        for k in range(K + 1):
            for rounded, values, op in ((floors, minus, "floor"), (ceilings, plus, "ceil")):
                if rounded[k] is not None:
                    continue
                try:
                    rounded[k] = values[k].floor() if op == "floor" else values[k].ceil()
                except UndecidableRoundingError:
                    stuck.append((k, op, values[k]))
        if not stuck:
            return list(zip(floors, ceilings)), minus, plus
        if bits >= MAX_BITS or all(enc.width <= width_cap for _, _, enc in stuck):
            k, op, enc = stuck[0]
            logger.warning(f"Cannot decide {op} of endpoint {k}: {enc}")
            raise UndecidableRoundingError(f"{op} of interval endpoint k={k} straddles an integer at maximum precision")
        bits = min(2 * bits, MAX_BITS)


def _visit_constants(endpoints: Endpoints, gamma: Fraction, bits: int):
    i0_minus, i0_plus = endpoints(bits)
    e, root_e, s0, root_minus, root_plus, c0 = _constants(i0_minus, i0_plus, gamma, bits)
    numerator = e * c0 * c0 / 2
    c1 = numerator / ((e - 1) * (1 + c0 * s0 * root_e / root_minus))
    c2_denominator = e - 1 - c0 * (2 * e - 1) / (3 * root_plus)
    return s0, c0, c1.rounded(bits), c2_denominator, numerator


def _build(endpoints: Endpoints, gamma: Fraction, K: int, params: Optional[IntervalSeqParams]) -> IntervalSeq:
    if K < 0:
        raise DomainError(f"K must be nonnegative, got {K}")
    intervals, minus, plus = _resolve_intervals(endpoints, gamma, K)

    s0, c0, c1, c2_denominator, numerator = _visit_constants(endpoints, gamma, DEFAULT_BITS)
    # None when the denominator of c2 is not positive at this precision
    c2 = (numerator / c2_denominator).rounded(DEFAULT_BITS) if c2_denominator.lo > 0 else None

    seq = IntervalSeq(gamma, s0, c0, c1, c2, tuple(intervals), tuple(minus), tuple(plus), params)
    if not seq.disjoint():
        logger.warning(f"Intervals overlap: {seq.intervals}")
        raise DomainError("Interval sequence is not disjoint; check that I0_plus < e I0_minus")
    return seq


def build_interval_seq(*, params: IntervalSeqParams, K: int) -> IntervalSeq:
    """Integer intervals I_0..I_K for rational starting endpoints

    Args:
        params (IntervalSeqParams): I0_minus, I0_plus, gamma
        K (int): last index

    Raises:
        UndecidableRoundingError: an endpoint straddles an integer at maximum precision
        DomainError: K < 0, or the resulting intervals overlap

    Returns:
        IntervalSeq: intervals with the constants s0, c0, c1, c2
    """
    return _build(params.endpoints, params.gamma, K, params)


def _visit_bound(endpoints: Endpoints, gamma: Fraction, precision: Fraction) -> RealEnclosure:
    def c2_denominator_at(bits: int) -> RealEnclosure:
        return _visit_constants(endpoints, gamma, bits)[3]

    if sign(c2_denominator_at) < 0:
        logger.warning("Visit bound inapplicable: c2 denominator is negative")
        raise DomainError("The visit bound needs e - 1 - c0 (2e - 1) / (3 sqrt(I0_plus)) > 0")
    # first working precision at which the denominator is provably positive
    start_bits = START_BITS
    while c2_denominator_at(start_bits).lo <= 0 and start_bits < MAX_BITS:
        start_bits = min(2 * start_bits, MAX_BITS)

    def compute(bits: int) -> RealEnclosure:
        _, _, c1, c2_denominator, numerator = _visit_constants(endpoints, gamma, bits)
        if c2_denominator.lo <= 0:
            raise EnclosureError(f"c2 denominator {c2_denominator} not separated from 0 at {bits} bits")
        c2 = (numerator / c2_denominator).rounded(bits)
        first = 1 / (exp(c1, bits=bits) - 1)
        second = 1 / (exp(c2, bits=bits) - 1)
        return (first + second).rounded(bits)

    return refine(compute, precision=precision, start_bits=start_bits)


def interval_visit_bound(*, params: Optional[IntervalSeqParams] = None, seq: Optional[IntervalSeq] = None,
                         precision: Fraction = DEFAULT_PRECISION) -> RealEnclosure:
    """Enclosure of 1/(e^{c1} - 1) + 1/(e^{c2} - 1)

    This bounds the probability that a process started anywhere in I_k, k >= 1, misses one
    of I_{k-1}, ..., I_0 on its way down. The value depends only on the starting parameters,
    so either the parameters or a sequence built from them may be passed.

    Args:
        params (IntervalSeqParams, optional): I0_minus, I0_plus, gamma
        seq (IntervalSeq, optional): a sequence from build_interval_seq
        precision (Fraction): target width

    Raises:
        DomainError: neither or both of params and seq given, seq has no rational starting
            endpoints, or c2 is not positive so the bound does not apply
    """
    if (params is None) == (seq is None):
        raise DomainError("Pass exactly one of params and seq")
    if seq is not None:
        if seq.params is None:
            raise DomainError("The sequence has no rational starting endpoints; use x_visit_bound")
        params = seq.params
    return _visit_bound(params.endpoints, params.gamma, precision)


def interval_table(seq: IntervalSeq) -> pd.DataFrame:
    """CSV-ready table with columns k, lo, hi"""
    return pd.DataFrame({
        "k": range(len(seq.intervals)),
        "lo": [lo for lo, _ in seq.intervals],
        "hi": [hi for _, hi in seq.intervals],
    })


def _extend(table: Tuple[Tuple[int, int], ...], K: int) -> List[Tuple[int, int]]:
    if K < 0:
        raise DomainError(f"K must be nonnegative, got {K}")
    base = list(table[: K + 1])
    if K < len(table):
        return base
    lo, hi = table[-1]
    seq = build_interval_seq(params=IntervalSeqParams(lo, hi, Fraction(1)), K=K - len(table) + 1)
    return base + list(seq.intervals[1:])


def extended_hills(*, K: int) -> List[Tuple[int, int]]:
    """H_0..H_K: the fixed H_0..H_3, then I_{k-3} grown from I_0 = H_3 with gamma = 1"""
    return _extend(HILLS, K)


def extended_valleys(*, K: int) -> List[Tuple[int, int]]:
    """V_0..V_K: the fixed V_0..V_2, then I_{k-2} grown from I_0 = V_2 with gamma = 1"""
    return _extend(VALLEYS, K)


@dataclass(frozen=True)
class JInterval:
    """One J_k: real endpoints as enclosures and the integers they contain"""

    k: int
    lo_real: RealEnclosure
    hi_real: RealEnclosure
    lo: int
    hi: int


def _delta_at(k0: int, delta: Optional[Fraction]) -> Callable[[int], RealEnclosure]:
    if delta is not None:
        return lambda bits: RealEnclosure.exact(delta)
    # delta_{k0+1} = e^{-(k0+1)/3} / 12
    return lambda bits: exp(Fraction(-(k0 + 1), 3), bits=bits) / 12


def _check_j_args(k0: int, w: Fraction, delta: Optional[Fraction], K: int):
    if not 0 <= w <= 1:
        raise DomainError(f"w must lie in [0, 1], got {w}")
    if delta is not None and not 0 < delta < Fraction(1, 3):
        raise DomainError(f"delta must lie in (0, 1/3), got {delta}")
    if k0 < 0 or K < 0:
        raise DomainError(f"Need k0 >= 0 and K >= 0, got k0={k0}, K={K}")


def j_intervals(*, k0: int, w: Fraction, K: int, delta: Optional[Fraction] = None) -> List[JInterval]:
    """J_0 = [y, y + y^{2/3}] with y = e^{k0+w-3 delta}, and J_k = [e^{k0+w+k-delta}, e^{k0+w+k+delta}]

    The integer endpoints are taken inward (ceiling of the left end, floor of the right end).

    Args:
        k0 (int): base exponent
        w (Fraction): offset in [0, 1]
        K (int): last index
        delta (Fraction, optional): half-width on the log scale, in (0, 1/3); defaults to e^{-(k0+1)/3}/12

    Raises:
        DomainError: arguments out of range, or some J_k contains no integer
        UndecidableRoundingError: an endpoint straddles an integer at maximum precision
    """
    w = Fraction(w)
    delta = None if delta is None else Fraction(delta)
    _check_j_args(k0, w, delta, K)
    delta_at = _delta_at(k0, delta)
    x = k0 + w

    def j0_lo(bits: int) -> RealEnclosure:
        return exp(x - 3 * delta_at(bits), bits=bits)

    def j0_hi(bits: int) -> RealEnclosure:
        exponent = x - 3 * delta_at(bits)
        return exp(exponent, bits=bits) + exp(exponent * Fraction(2, 3), bits=bits)

    result = [JInterval(0, j0_lo(DEFAULT_BITS), j0_hi(DEFAULT_BITS), decide(j0_lo, "ceil"), decide(j0_hi, "floor"))]
    for k in range(1, K + 1):
        def lo_at(bits: int, k=k) -> RealEnclosure:
            return exp(x + k - delta_at(bits), bits=bits)

        def hi_at(bits: int, k=k) -> RealEnclosure:
            return exp(x + k + delta_at(bits), bits=bits)

        result.append(JInterval(k, lo_at(DEFAULT_BITS), hi_at(DEFAULT_BITS), decide(lo_at, "ceil"), decide(hi_at, "floor")))
    empty = [j.k for j in result if j.lo > j.hi]
    if empty:
        logger.warning(f"J_k holds no integer for k in {empty} at k0={k0}, w={w}")
        raise DomainError(f"J_{empty[0]} contains no integer for k0={k0}; the intervals need a larger k0")
    return result


def _x_endpoints(x: Fraction) -> Endpoints:
    def endpoints(bits: int) -> Tuple[RealEnclosure, RealEnclosure]:
        # delta_x = e^{-x/3} / 12, I0^-+ = e^{x -+ 2 delta_x}
        delta_x = exp(-x / 3, bits=bits) / 12
        return exp(x - 2 * delta_x, bits=bits), exp(x + 2 * delta_x, bits=bits)

    return endpoints


def x_interval_seq(*, x: Fraction, K: int) -> IntervalSeq:
    """I_0(x)..I_K(x): the sequence grown from [e^{x-2 delta_x}, e^{x+2 delta_x}] with gamma = 1/4"""
    x = Fraction(x)
    if x < 0:
        raise DomainError(f"x must be nonnegative, got {x}")
    return _build(_x_endpoints(x), Fraction(1, 4), K, None)


def x_visit_bound(*, x: Fraction, precision: Fraction = DEFAULT_PRECISION) -> RealEnclosure:
    """Visit bound of the I_k(x) sequence"""
    return _visit_bound(_x_endpoints(Fraction(x)), Fraction(1, 4), precision)


def j_inclusion_report(*, k0: int, w: Fraction, K: int, delta: Optional[Fraction] = None) -> pd.DataFrame:
    """Reports, without asserting, whether J_k lies in I_k(x) for k >= 1 and I_0(x) lies in J_0, with x = k0 + w

    The inclusions are only expected once k0 is large enough.

    Returns:
        pd.DataFrame: columns k, inclusion, inner_lo, inner_hi, outer_lo, outer_hi, holds
    """
    w = Fraction(w)
    j_list = j_intervals(k0=k0, w=w, K=K, delta=delta)
    seq = x_interval_seq(x=k0 + w, K=K)
    rows = []
    i0_lo, i0_hi = seq.intervals[0]
    j0 = j_list[0]
    rows.append({"k": 0, "inclusion": "I_0(x) in J_0", "inner_lo": i0_lo, "inner_hi": i0_hi,
                 "outer_lo": j0.lo, "outer_hi": j0.hi, "holds": j0.lo <= i0_lo and i0_hi <= j0.hi})
    for j in j_list[1:]:
        lo, hi = seq.intervals[j.k]
        rows.append({"k": j.k, "inclusion": "J_k in I_k(x)", "inner_lo": j.lo, "inner_hi": j.hi,
                     "outer_lo": lo, "outer_hi": hi, "holds": lo <= j.lo and j.hi <= hi})
    report = pd.DataFrame(rows, columns=["k", "inclusion", "inner_lo", "inner_hi", "outer_lo", "outer_hi", "holds"])
    failing = int((~report["holds"]).sum())
    if failing:
        logger.info(f"k0={k0}, w={w}: {failing} of {len(report)} inclusions fail")
    return report


def first_k0_with_inclusions(*, w: Fraction, K: int, k0_min: int = 1, k0_max: int = 20,
                             delta: Optional[Fraction] = None) -> Optional[int]:
    """Smallest k0 in [k0_min, k0_max] at which every reported inclusion holds, if any"""
    for k0 in range(k0_min, k0_max + 1):
        try:
            report = j_inclusion_report(k0=k0, w=w, K=K, delta=delta)
        except DomainError as e:
            # small x can make I_k(x) overlap or leave J_k without integers
            logger.info(f"k0={k0}: {e}")
            continue
        if bool(report["holds"].all()):
            return k0
    return None


__all__ = [
    "HILLS",
    "VALLEYS",
    "IntervalSeq",
    "IntervalSeqParams",
    "JInterval",
    "build_interval_seq",
    "extended_hills",
    "extended_valleys",
    "first_k0_with_inclusions",
    "interval_table",
    "interval_visit_bound",
    "j_inclusion_report",
    "j_intervals",
    "s0_enclosure",
    "x_interval_seq",
    "x_visit_bound",
]
