"""Rigorous real enclosures with exact rational endpoints.

A RealEnclosure [lo, hi] is a pair of Fractions certified to contain a real
quantity. Transcendental functions are evaluated in directed fixed-point
integer arithmetic at a working precision of `bits` fractional bits: lower
endpoints are always rounded toward -inf and upper endpoints toward +inf, so
every result contains the true value. No hardware floating point is used.
"""
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Optional, Union

from grouproulette import get_settings
from grouproulette.errors import DomainError, EnclosureError, UndecidableRoundingError

logger = logging.getLogger("grouproulette.enclosure")
logging.captureWarnings(True)

DEFAULT_BITS = 128
START_BITS = 64
MAX_BITS = 8192
# escalation stops once the enclosure is narrower than 2^-CAP_WIDTH_BITS (~1e-60)
CAP_WIDTH_BITS = get_settings()["precision_cap_bits"]

Number = Union[int, Fraction]


def _floor_div(a: int, b: int) -> int:
    return a // b


def _ceil_div(a: int, b: int) -> int:
    return -((-a) // b)


@dataclass(frozen=True)
class RealEnclosure:
    """Closed interval [lo, hi] of exact rationals containing a real quantity"""

    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        object.__setattr__(self, "lo", Fraction(self.lo))
        object.__setattr__(self, "hi", Fraction(self.hi))
        if self.lo > self.hi:
            raise DomainError(f"Invalid enclosure: lo {self.lo} > hi {self.hi}")

    @classmethod
    def exact(cls, value: Number) -> "RealEnclosure":
        return cls(Fraction(value), Fraction(value))

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def midpoint(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def contains(self, value: Union[Number, "RealEnclosure"]) -> bool:
        if isinstance(value, RealEnclosure):
            return self.lo <= value.lo and value.hi <= self.hi
        return self.lo <= value <= self.hi

    def rounded(self, bits: int) -> "RealEnclosure":
        """Outward rounding of both endpoints onto the grid 2^-bits"""
        den = 1 << bits
        lo = Fraction(_floor_div(self.lo.numerator * den, self.lo.denominator), den)
        hi = Fraction(_ceil_div(self.hi.numerator * den, self.hi.denominator), den)
        return RealEnclosure(lo, hi)

    # comparisons are certain: they hold for every point of both enclosures
    def certainly_lt(self, other: Union[Number, "RealEnclosure"]) -> bool:
        return self.hi < _lo(other)

    def certainly_le(self, other: Union[Number, "RealEnclosure"]) -> bool:
        return self.hi <= _lo(other)

    def certainly_gt(self, other: Union[Number, "RealEnclosure"]) -> bool:
        return self.lo > _hi(other)

    def certainly_ge(self, other: Union[Number, "RealEnclosure"]) -> bool:
        return self.lo >= _hi(other)

    def floor(self) -> int:
        """Floor of the enclosed quantity, when the enclosure decides it"""
        lo_floor = math.floor(self.lo)
        if lo_floor != math.floor(self.hi):
            raise UndecidableRoundingError(f"Floor undecided for enclosure of width {float(self.width):.3g}")
        return lo_floor

    def ceil(self) -> int:
        """Ceiling of the enclosed quantity, when the enclosure decides it"""
        hi_ceil = math.ceil(self.hi)
        if hi_ceil != math.ceil(self.lo):
            raise UndecidableRoundingError(f"Ceiling undecided for enclosure of width {float(self.width):.3g}")
        return hi_ceil

    def __neg__(self) -> "RealEnclosure":
        return RealEnclosure(-self.hi, -self.lo)

    def __add__(self, other):
        other = as_enclosure(other)
        return RealEnclosure(self.lo + other.lo, self.hi + other.hi)

    __radd__ = __add__

    def __sub__(self, other):
        other = as_enclosure(other)
        return RealEnclosure(self.lo - other.hi, self.hi - other.lo)

    def __rsub__(self, other):
        return as_enclosure(other) - self

    def __mul__(self, other):
        other = as_enclosure(other)
        products = (self.lo * other.lo, self.lo * other.hi, self.hi * other.lo, self.hi * other.hi)
        return RealEnclosure(min(products), max(products))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_enclosure(other)
        if other.lo <= 0 <= other.hi:
            raise EnclosureError("Division by an enclosure containing 0")
        return self * RealEnclosure(1 / other.hi, 1 / other.lo)

    def __rtruediv__(self, other):
        return as_enclosure(other) / self

    def __repr__(self) -> str:
        return f"RealEnclosure([{float(self.lo):.12g}, {float(self.hi):.12g}])"


def as_enclosure(value: Union[Number, RealEnclosure]) -> RealEnclosure:
    if isinstance(value, RealEnclosure):
        return value
    if isinstance(value, (int, Fraction)):
        return RealEnclosure.exact(value)
    raise TypeError(f"Expected an exact rational or RealEnclosure, got {type(value).__name__}")


def _lo(value) -> Fraction:
    return value.lo if isinstance(value, RealEnclosure) else Fraction(value)


def _hi(value) -> Fraction:
    return value.hi if isinstance(value, RealEnclosure) else Fraction(value)


def _scaled(value: Fraction, bits: int) -> tuple:
    """floor and ceil of value * 2^bits"""
    num = value.numerator << bits
    return _floor_div(num, value.denominator), _ceil_div(num, value.denominator)


def _exp_fixed(q: Fraction, p: int) -> tuple:
    """Integers (lo, hi) with lo/2^p <= exp(q) <= hi/2^p, for q > 0"""
    # reduce to y = q / 2^s <= 1/2, then square s times
    s = 0
    while q / (1 << s) > Fraction(1, 2):
        s += 1
    guard = s + 16
    w = p + guard
    one = 1 << w
    y_lo, y_hi = _scaled(q / (1 << s), w)

    sum_lo, term = one, one
    j = 1
    while term:
        term = _floor_div(term * y_lo, j << w)
        sum_lo += term
        j += 1

    sum_hi, term = one, one
    j = 1
    while term > 1:
        term = _ceil_div(term * y_hi, j << w)
        sum_hi += term
        j += 1
    # tail after the last term is at most twice the next term, itself <= 1 ulp
    sum_hi += 2 * _ceil_div(term * y_hi, j << w) + 1

    for _ in range(s):
        sum_lo = _floor_div(sum_lo * sum_lo, one)
        sum_hi = _ceil_div(sum_hi * sum_hi, one)

    return sum_lo >> guard, _ceil_div(sum_hi, 1 << guard)


def _exp_point(q: Fraction, bits: int) -> RealEnclosure:
    den = 1 << bits
    if q == 0:
        return RealEnclosure.exact(1)
    if q > 0:
        lo, hi = _exp_fixed(q, bits)
        return RealEnclosure(Fraction(lo, den), Fraction(hi, den))
    # exp(q) = 1/exp(-q); compute the reciprocal with enough headroom for tiny results
    extra = math.ceil(float(-q) * 1.45) + 8
    lo, hi = _exp_fixed(-q, bits + extra)
    scale = 1 << (bits + extra)
    return RealEnclosure(Fraction(scale, hi), Fraction(scale, lo)).rounded(bits + extra)


def _atanh_fixed(z: Fraction, p: int) -> tuple:
    """Integers (lo, hi) with lo/2^p <= atanh(z) <= hi/2^p, for 0 <= z <= 1/3"""
    guard = 16
    w = p + guard
    z_lo, z_hi = _scaled(z, w)
    one = 1 << w

    zz_lo = _floor_div(z_lo * z_lo, one)
    sum_lo, pw, j = 0, z_lo, 0
    while pw:
        sum_lo += pw // (2 * j + 1)
        pw = _floor_div(pw * zz_lo, one)
        j += 1

    zz_hi = _ceil_div(z_hi * z_hi, one)
    sum_hi, pw, j = 0, z_hi, 0
    while pw > 1:
        sum_hi += _ceil_div(pw, 2 * j + 1)
        pw = _ceil_div(pw * zz_hi, one)
        j += 1
    # remaining terms sum to at most (9/8) * pw
    sum_hi += 2 * pw + 1

    return sum_lo >> guard, _ceil_div(sum_hi, 1 << guard)


@lru_cache(maxsize=64)
def _log2_fixed(p: int) -> tuple:
    lo, hi = _atanh_fixed(Fraction(1, 3), p)
    return 2 * lo, 2 * hi


def _log_point(x: Fraction, bits: int) -> RealEnclosure:
    if x <= 0:
        raise DomainError(f"Logarithm of a nonpositive number: {x}")
    if x == 1:
        return RealEnclosure.exact(0)
    k = x.numerator.bit_length() - x.denominator.bit_length()
    m = x / Fraction(2) ** k
    if m < 1:
        k -= 1
        m *= 2
    elif m >= 2:
        k += 1
        m /= 2
    den = 1 << bits
    a_lo, a_hi = _atanh_fixed((m - 1) / (m + 1), bits)
    l2_lo, l2_hi = _log2_fixed(bits)
    if k >= 0:
        lo, hi = k * l2_lo + 2 * a_lo, k * l2_hi + 2 * a_hi
    else:
        lo, hi = k * l2_hi + 2 * a_lo, k * l2_lo + 2 * a_hi
    return RealEnclosure(Fraction(lo, den), Fraction(hi, den))


def _sqrt_point(x: Fraction, bits: int) -> RealEnclosure:
    if x < 0:
        raise DomainError(f"Square root of a negative number: {x}")
    lo_sq, hi_sq = _scaled(x, 2 * bits)
    lo = math.isqrt(lo_sq)
    hi = math.isqrt(hi_sq)
    if hi * hi < hi_sq:
        hi += 1
    den = 1 << bits
    return RealEnclosure(Fraction(lo, den), Fraction(hi, den))


def exp(x: Union[Number, RealEnclosure], *, bits: int = DEFAULT_BITS) -> RealEnclosure:
    """Enclosure of exp(x); exp is increasing so endpoints map to endpoints"""
    x = as_enclosure(x)
    return RealEnclosure(_exp_point(x.lo, bits).lo, _exp_point(x.hi, bits).hi)


def log(x: Union[Number, RealEnclosure], *, bits: int = DEFAULT_BITS) -> RealEnclosure:
    """Enclosure of the natural logarithm of x > 0"""
    x = as_enclosure(x)
    if x.lo <= 0:
        raise EnclosureError(f"Logarithm of an enclosure reaching {x.lo}")
    return RealEnclosure(_log_point(x.lo, bits).lo, _log_point(x.hi, bits).hi)


def sqrt(x: Union[Number, RealEnclosure], *, bits: int = DEFAULT_BITS) -> RealEnclosure:
    """Enclosure of the square root by exact integer square roots"""
    x = as_enclosure(x)
    if x.lo < 0:
        raise EnclosureError(f"Square root of an enclosure reaching {x.lo}")
    return RealEnclosure(_sqrt_point(x.lo, bits).lo, _sqrt_point(x.hi, bits).hi)


def power(base: Union[Number, RealEnclosure], exponent: Union[Number, RealEnclosure], *, bits: int = DEFAULT_BITS) -> RealEnclosure:
    """base^exponent = exp(exponent * log(base)) for a positive base"""
    return exp(as_enclosure(exponent) * log(base, bits=bits), bits=bits)


@lru_cache(maxsize=64)
def euler(*, bits: int = DEFAULT_BITS) -> RealEnclosure:
    """Enclosure of e"""
    return _exp_point(Fraction(1), bits)


def refine(compute: Callable[[int], RealEnclosure], *, precision: Fraction,
           start_bits: int = START_BITS, max_bits: int = MAX_BITS) -> RealEnclosure:
    """Evaluates compute(bits) at doubling precision until the width target is met

    Args:
        compute (Callable): maps a working precision in bits to an enclosure
        precision (Fraction): target width
        start_bits (int): first working precision
        max_bits (int): hard cap on the working precision

    Raises:
        EnclosureError: the target width was not met at max_bits

    Returns:
        RealEnclosure: the first enclosure of width <= precision
    """
    precision = Fraction(precision)
    if precision <= 0:
        raise DomainError(f"Precision must be a positive width, got {precision}")
    bits = start_bits
    while True:
        enc = compute(bits)
        if enc.width <= precision:
            return enc
        if bits >= max_bits:
            logger.warning(f"Enclosure width {float(enc.width):.3g} above target {float(precision):.3g} at {bits} bits")
            raise EnclosureError(f"Could not reach width {precision} within {max_bits} bits")
        bits = min(2 * bits, max_bits)


def decide(compute: Callable[[int], RealEnclosure], rounding: str, *, start_bits: int = START_BITS,
           cap_width_bits: int = CAP_WIDTH_BITS) -> int:
    """Floor or ceiling of an enclosed quantity, escalating precision until decided

    Args:
        compute (Callable): maps a working precision in bits to an enclosure
        rounding (str): "floor" or "ceil"
        start_bits (int): first working precision
        cap_width_bits (int): give up once the enclosure is narrower than 2^-cap_width_bits

    Raises:
        UndecidableRoundingError: the enclosure still straddles an integer at the cap

    Returns:
        int: the decided floor or ceiling
    """
    if rounding not in ("floor", "ceil"):
        raise DomainError(f"Rounding must be 'floor' or 'ceil', got {rounding}")
    bits = start_bits
    width_cap = Fraction(1, 1 << cap_width_bits)
    enc: Optional[RealEnclosure] = None
    while bits <= MAX_BITS:
        enc = compute(bits)
        try:
            return enc.floor() if rounding == "floor" else enc.ceil()
        except UndecidableRoundingError:
            if enc.width <= width_cap:
                break
            bits *= 2
    logger.warning(f"Undecidable {rounding} for enclosure {enc}")
    raise UndecidableRoundingError(f"Cannot decide {rounding} of {enc} at maximum precision")


def sign(compute: Callable[[int], RealEnclosure], *, start_bits: int = START_BITS, max_bits: int = MAX_BITS) -> int:
    """Sign of a nonzero enclosed quantity, escalating precision until the enclosure excludes 0

    Raises:
        EnclosureError: the enclosure still contains 0 at max_bits
    """
    bits = start_bits
    while True:
        enc = compute(bits)
        if enc.lo > 0:
            return 1
        if enc.hi < 0:
            return -1
        if bits >= max_bits:
            logger.warning(f"Sign undecided for {enc} at {bits} bits")
            raise EnclosureError(f"Cannot separate {enc} from 0 within {max_bits} bits")
        bits = min(2 * bits, max_bits)
