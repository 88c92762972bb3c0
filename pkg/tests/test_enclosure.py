from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from grouproulette.decimals import ceil_to_places, floor_to_places, format_decimal, parse_rational
from grouproulette.enclosure import RealEnclosure, decide, euler, exp, log, power, refine, sign, sqrt
from grouproulette.errors import DomainError, EnclosureError, UndecidableRoundingError

rationals = st.fractions(min_value=-20, max_value=20, max_denominator=1000)
positives = st.fractions(min_value=Fraction(1, 1000), max_value=1000, max_denominator=1000)


def near(enc: RealEnclosure, digits: int, places: int) -> bool:
    """True when enc lies inside [digits, digits + 1] * 10^-places"""
    return Fraction(digits, 10**places) <= enc.lo and enc.hi <= Fraction(digits + 1, 10**places)


def test_euler():
    e = euler(bits=128)
    assert near(e, 2718281828459045235, 18)
    assert e.width < Fraction(1, 2**120)


def test_known_constants():
    assert near(log(2), 693147180559945309, 18)
    assert near(sqrt(2), 1414213562373095048, 18)
    assert near(exp(Fraction(-1, 2)), 606530659712633423, 18)


def test_exact_points():
    assert exp(0) == RealEnclosure.exact(1)
    assert log(1) == RealEnclosure.exact(0)
    assert sqrt(9).contains(3)


@given(x=rationals)
def test_log_inverts_exp(x):
    assert log(exp(x, bits=96), bits=96).contains(x)


@given(x=positives)
def test_sqrt_squares_back(x):
    root = sqrt(x, bits=80)
    assert root.lo * root.lo <= x <= root.hi * root.hi


@given(x=positives)
def test_power_with_integer_exponent(x):
    assert power(x, 2, bits=96).contains(x * x)


@given(a=rationals, b=rationals, c=rationals, d=rationals)
def test_arithmetic_contains_point_results(a, b, c, d):
    first = RealEnclosure(min(a, b), max(a, b))
    second = RealEnclosure(min(c, d), max(c, d))
    for x in (first.lo, first.hi, first.midpoint):
        for y in (second.lo, second.hi, second.midpoint):
            assert (first + second).contains(x + y)
            assert (first - second).contains(x - y)
            assert (first * second).contains(x * y)


@given(x=rationals, bits=st.integers(min_value=1, max_value=64))
def test_rounding_is_outward(x, bits):
    enc = RealEnclosure(x, x + Fraction(1, 3)).rounded(bits)
    assert enc.contains(RealEnclosure(x, x + Fraction(1, 3)))


def test_invalid_enclosure():
    with pytest.raises(DomainError):
        RealEnclosure(2, 1)


def test_division_by_enclosure_containing_zero():
    with pytest.raises(EnclosureError):
        RealEnclosure.exact(1) / RealEnclosure(-1, 1)


def test_floor_and_ceil_decisions():
    assert RealEnclosure(Fraction(21, 10), Fraction(29, 10)).floor() == 2
    assert RealEnclosure(Fraction(21, 10), Fraction(29, 10)).ceil() == 3
    with pytest.raises(UndecidableRoundingError):
        RealEnclosure(Fraction(19, 10), Fraction(21, 10)).floor()


def test_refine_meets_width():
    enc = refine(lambda bits: euler(bits=bits), precision=Fraction(1, 10**30))
    assert enc.width <= Fraction(1, 10**30)


def test_refine_rejects_nonpositive_precision():
    with pytest.raises(DomainError):
        refine(lambda bits: euler(bits=bits), precision=0)


def test_decide_escalates():
    # e^10 = 22026.4657...
    assert decide(lambda bits: exp(10, bits=bits), "floor") == 22026
    assert decide(lambda bits: exp(10, bits=bits), "ceil") == 22027


def test_decide_gives_up_on_integers_hidden_in_wide_enclosures():
    with pytest.raises(UndecidableRoundingError):
        decide(lambda bits: RealEnclosure(1 - Fraction(1, 2**bits), 1 + Fraction(1, 2**bits)), "floor")


def test_sign():
    assert sign(lambda bits: euler(bits=bits) - Fraction(27, 10)) == 1
    assert sign(lambda bits: Fraction(27, 10) - euler(bits=bits) - Fraction(1, 10**6)) == -1
    with pytest.raises(EnclosureError):
        sign(lambda bits: RealEnclosure(-Fraction(1, 2**bits), Fraction(1, 2**bits)), max_bits=256)


class TestDecimals:
    def test_directed_rendering(self):
        assert format_decimal(value=Fraction(1, 3), places=4) == "0.3333"
        assert format_decimal(value=Fraction(1, 3), places=4, direction="up") == "0.3334"
        assert format_decimal(value=Fraction(-1, 3), places=2) == "-0.34"
        assert format_decimal(value=1, places=10) == "1.0000000000"
        assert format_decimal(value=Fraction(7, 2), places=0, direction="up") == "4"

    def test_unknown_direction(self):
        with pytest.raises(DomainError):
            format_decimal(value=1, direction="nearest")

    def test_places(self):
        assert ceil_to_places(value=Fraction(1, 3), places=3) == Fraction(334, 1000)
        assert floor_to_places(value=Fraction(1, 3), places=3) == Fraction(333, 1000)

    def test_parse(self):
        assert parse_rational("1e-12") == Fraction(1, 10**12)
        assert parse_rational("0.515428") == Fraction(515428, 10**6)
        with pytest.raises(DomainError):
            parse_rational("one half")
