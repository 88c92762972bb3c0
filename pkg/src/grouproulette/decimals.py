import math
from fractions import Fraction
from typing import Union

from grouproulette.errors import DomainError

Rational = Union[int, Fraction]


def format_decimal(*, value: Rational, places: int = 10, direction: str = "down") -> str:
    """Renders an exact rational as a fixed-point decimal string

    Args:
        value (int or Fraction): exact value
        places (int): digits after the decimal point
        direction (str): "down" rounds toward -inf, "up" toward +inf

    Raises:
        DomainError: unknown rounding direction

    Returns:
        str: e.g. "0.2500000000"; no locale-dependent formatting
    """
    if direction not in ("down", "up"):
        raise DomainError(f"Rounding direction must be 'down' or 'up', got {direction}")

    value = Fraction(value)
    scaled = value * 10**places
    digits = math.floor(scaled) if direction == "down" else math.ceil(scaled)

    sign = "-" if digits < 0 else ""
    digits = abs(digits)
    if places == 0:
        return f"{sign}{digits}"
    whole, frac = divmod(digits, 10**places)
    return f"{sign}{whole}.{frac:0{places}d}"


def ceil_to_places(*, value: Rational, places: int = 10) -> Fraction:
    """Smallest rational of the form m/10^places that is >= value"""
    return Fraction(math.ceil(Fraction(value) * 10**places), 10**places)


def floor_to_places(*, value: Rational, places: int = 10) -> Fraction:
    """Largest rational of the form m/10^places that is <= value"""
    return Fraction(math.floor(Fraction(value) * 10**places), 10**places)


def parse_rational(text: Union[str, int, Fraction]) -> Fraction:
    """Exact rational from a decimal/scientific string such as "1e-12" or "0.515428"."""
    if isinstance(text, (int, Fraction)):
        return Fraction(text)
    try:
        return Fraction(str(text).strip())
    except ValueError as e:
        raise DomainError(f"Not a rational number: {text}") from e
