from fractions import Fraction as F

import numpy as np
import pytest

from relulab.monotone import (
    affine_map,
    identity_map,
    logistic_map,
    parse_monotone,
    step_map,
    threshold_map,
)


def test_identity_and_threshold_semantics():
    g = identity_map()
    assert g(F(1, 3)) == F(1, 3)
    t = threshold_map()
    assert t(F(1, 2)) == 1
    assert t(F(1, 2) - F(1, 10**9)) == 0


def test_cmp_half_is_exact():
    g = identity_map()
    just_below = F(1, 2) - F(1, 10**30)
    assert g.cmp_half(just_below) < 0
    assert g.cmp_half(F(1, 2)) == 0
    # logistic(0) = 1/2 exactly, so the comparison is the sign of the input
    lg = logistic_map()
    assert lg.cmp_half(F(0)) == 0
    assert lg.cmp_half(F(-1, 10**30)) < 0
    assert lg.cmp_half(F(1, 10**30)) > 0
    assert not lg.is_exact


def test_logistic_batch_values():
    lg = logistic_map()
    z = np.array([0.0, 3.0, -3.0])
    out = lg.apply_batch(z)
    assert np.allclose(out, 1.0 / (1.0 + np.exp(-z)))
    dv = lg.deriv_batch(z)
    assert np.allclose(dv, out * (1 - out))


def test_parsing_roundtrip():
    for g in (identity_map(), threshold_map(), logistic_map(), affine_map(F(2), F(-1))):
        assert parse_monotone(g.spec_string()).spec_string() == g.spec_string()
    s = step_map([F(0), F(1, 2)], [F(0), F(1, 4), F(1)])
    assert parse_monotone(s.spec_string()).spec_string() == s.spec_string()
    assert s(F(-1)) == F(0)
    assert s(F(1, 4)) == F(1, 4)  # right-closed: g(t_i) takes the upper value
    assert s(F(3, 4)) == F(1)
    with pytest.raises(ValueError):
        parse_monotone("sigmoidish")


def test_step_validation():
    with pytest.raises(ValueError):
        step_map([F(1), F(0)], [F(0), F(1, 2), F(1)])
    with pytest.raises(ValueError):
        step_map([F(0), F(1)], [F(0), F(1, 2)])  # values length mismatch
    with pytest.raises(ValueError):
        step_map([F(0)], [F(1), F(0)])  # decreasing values
    with pytest.raises(ValueError):
        affine_map(F(-1), F(0))


def test_threshold_not_trainable():
    t = threshold_map()
    assert not t.is_differentiable
    with pytest.raises(ValueError):
        t.deriv_batch(np.zeros(3))
