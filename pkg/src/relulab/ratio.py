"""Exact scalar helpers shared by every rational-arithmetic module.

All exact quantities in this package are `fractions.Fraction` values; this
module only adds the serialization convention ("p/q" strings, denominator
always written) and a few coercion helpers. Floats are never coerced
implicitly into the exact lane: callers must opt in via `exact_from_float`,
which converts the float's binary value verbatim.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Union

Scalar = Union[Fraction, float]


def format_ratio(value: Fraction) -> str:
    """Render a Fraction as "p/q" (denominator always explicit)."""
    return f"{value.numerator}/{value.denominator}"


def parse_ratio(text: str) -> Fraction:
    """Parse "p/q" (or a bare integer "p") into a Fraction."""
    return Fraction(text.strip())


def as_ratio(value) -> Fraction:
    """Coerce int / str / Fraction to Fraction; refuse floats.

    Floats carry binary rounding that would silently poison exact proofs;
    use exact_from_float when the binary value itself is intended.
    """
    if isinstance(value, float):
        raise TypeError(
            "refusing implicit float -> rational coercion; "
            "use exact_from_float for the exact binary value"
        )
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, str)):
        return Fraction(value)
    raise TypeError(f"cannot interpret {value!r} as an exact rational")


def exact_from_float(value: float) -> Fraction:
    """The exact rational equal to the float64 bit pattern."""
    return Fraction(value)
