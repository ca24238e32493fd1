from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from relulab.ratio import as_ratio, exact_from_float, format_ratio, parse_ratio


def test_format_and_parse_roundtrip_simple():
    assert format_ratio(Fraction(1, 3)) == "1/3"
    assert format_ratio(Fraction(-7, 2)) == "-7/2"
    assert format_ratio(Fraction(5)) == "5/1"
    assert parse_ratio("1/3") == Fraction(1, 3)
    assert parse_ratio("-7/2") == Fraction(-7, 2)
    assert parse_ratio("4") == Fraction(4)


@given(st.fractions())
def test_roundtrip_property(q):
    assert parse_ratio(format_ratio(q)) == q


def test_as_ratio_refuses_floats():
    with pytest.raises(TypeError):
        as_ratio(0.5)
    assert as_ratio(3) == Fraction(3)
    assert as_ratio(Fraction(2, 7)) == Fraction(2, 7)


def test_exact_from_float_is_exact():
    x = 0.1
    q = exact_from_float(x)
    assert float(q) == x
    assert q != Fraction(1, 10)  # binary floats are not decimal
