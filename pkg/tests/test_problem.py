import json
import math
import warnings
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from relulab.problem import (
    ProblemInstance,
    ZetaDistribution,
    cf_eps_bound,
    classify,
    classify_first,
    cost_eval,
    dataset_from_json,
    dataset_to_json,
    distribution_constants,
    enumerate_dataset,
    grid_index,
    grid_point,
    is_well_separated,
    sample_dataset,
    separation_radius,
    theorem_constant,
    theorem_radius,
    trial_rng,
    zeta_normalizer,
)

INST = ProblemInstance(a=F(1, 2), kappa=F(1, 2), delta=F(1, 100), d=2)

# Independently computed reference values (mpmath, 30 digits), frozen here.
ZETA_32 = 2.61237534868548834
NORM_32 = 0.382793383999426562  # 1/zeta(3/2)
C1_32 = 0.159023106352631179
C2_32 = 0.765586767998853124
THEOREM_C = 3957478.6244478969


def test_instance_validation():
    with pytest.raises(ValueError):
        ProblemInstance(a=F(1, 4), kappa=F(1, 2), delta=F(0), d=2)
    with pytest.raises(ValueError):
        ProblemInstance(a=F(1, 2), kappa=F(7, 8), delta=F(0), d=2)
    with pytest.raises(ValueError):
        ProblemInstance(a=F(1, 2), kappa=F(1, 2), delta=F(-1, 10), d=2)
    with pytest.raises(ValueError):
        ProblemInstance(a=F(1, 2), kappa=F(1, 2), delta=F(0), d=1)


def test_grid_points_and_labels():
    # x1 = a/(k+1-kappa); the label is the parity of ceil(a/x1) = k+1
    pt1 = grid_point(INST, 1)
    assert pt1 == (F(1, 2) / F(3, 2), F(0))
    assert classify(INST, pt1) == 0  # k=1: ceil = 2, even
    pt2 = grid_point(INST, 2)
    assert pt2[1] == INST.delta  # even k carries the delta marker
    assert classify(INST, pt2) == 1
    for k in range(1, 60):
        assert classify(INST, grid_point(INST, k)) == (1 if k % 2 == 0 else 0)


@given(st.integers(min_value=1, max_value=10**6))
def test_grid_index_inverts_grid_point(k):
    assert grid_index(INST, grid_point(INST, k)[0]) == k


def test_grid_index_off_grid():
    assert grid_index(INST, F(1, 7) + F(1, 10**9)) is None


def test_classify_first_breakpoints():
    # exactly at a breakpoint x1 = a/m, ceil(a/x1) = m
    assert classify_first(INST, F(1, 2)) == 1  # ceil = 1
    assert classify_first(INST, F(1, 4)) == 0  # ceil = 2
    with pytest.raises(ValueError):
        classify_first(INST, F(0))


def test_separation_radius_values():
    assert separation_radius(1) == F(1, 7 * 8)
    assert separation_radius(50) == F(1, 203 * 204)
    # radius shrinks and is always below the consecutive-gap scale
    for n in (1, 5, 25, 100):
        gap = grid_point(INST, n)[0] - grid_point(INST, n + 1)[0]
        assert 2 * separation_radius(n) < gap


def test_theorem_radius_matches_formula():
    assert theorem_radius(100.0, 10.0) == (100.0 * 10.0) ** -4


def test_zeta_normalizer_against_reference():
    assert abs(zeta_normalizer(1.5) - NORM_32) < 1e-8
    assert abs(1.0 / zeta_normalizer(1.5) - ZETA_32) < 1e-7


def test_distribution_constants_against_reference():
    c1, c2 = distribution_constants(1.5)
    assert abs(c1 - C1_32) < 1e-9
    assert abs(c2 - C2_32) < 1e-9


def test_theorem_constant_value_and_components():
    c = theorem_constant()
    assert abs(c - THEOREM_C) / THEOREM_C < 1e-9
    c1, c2 = distribution_constants(1.5)
    components = (
        4**3 * c1**-6,
        200.0 * math.log(8.0) ** 1.5 * c1**-1.5,
        4.0 * (8.0 * c2) ** 2,
    )
    assert c == max(components)
    assert abs(components[1] - 9457.1379) < 1e-3
    assert abs(components[2] - 150.0475) < 1e-3


# ---------------------------------------------------------------------------
# zeta-type sampling


def test_mass_pairs_and_cdf():
    dist = ZetaDistribution(1.5)
    # paired masses: indices 2j-1 and 2j share the weight (norm/2) j^-gamma
    assert dist.mass(1) == dist.mass(2)
    assert dist.mass(3) == dist.mass(4)
    assert abs(dist.mass(1) - 0.5 * NORM_32) < 1e-9
    assert abs(dist.cdf_point(2) - NORM_32) < 1e-9
    assert dist.cdf_point(1) == pytest.approx(dist.mass(1) + dist.cdf_point(0))
    assert dist.cdf_point(0) == 0.0


def test_mass_sums_to_one_at_fast_decay():
    # gamma = 1.9 decays fast enough to certify the total mass numerically
    dist = ZetaDistribution(1.9, initial_pairs=1 << 22)
    total = dist.cdf_point(2 * dist.pairs_tabulated)
    tail = dist.pairs_tabulated ** (1 - 1.9) / (1.9 - 1) * zeta_normalizer(1.9)
    assert total + tail == pytest.approx(1.0, abs=1e-6)
    assert total < 1.0


def test_sample_distribution_matches_cdf():
    dist = ZetaDistribution(1.5)
    rng = trial_rng(99, 0)
    draws = dist.sample(200_000, rng)
    assert draws.min() >= 1
    # empirical P(X <= 2) vs exact, 4 sigma
    p = dist.cdf_point(2)
    emp = float(np.mean(draws <= 2))
    assert abs(emp - p) < 4 * math.sqrt(p * (1 - p) / draws.size)
    # both parities occur in each pair
    assert np.any(draws == 1) and np.any(draws == 2)


def test_sample_stream_independent_of_table_growth():
    # pre-grown table must give the identical stream (draws consume exactly
    # two rng variates regardless of tabulation state)
    a = ZetaDistribution(1.5).sample(5000, trial_rng(5, 1))
    big = ZetaDistribution(1.5, initial_pairs=1 << 20)
    b = big.sample(5000, trial_rng(5, 1))
    assert np.array_equal(a, b)


def test_truncation_is_counted_and_warned(monkeypatch):
    import relulab.problem as problem_mod

    monkeypatch.setattr(problem_mod, "PAIR_CAP", 1024)  # keep the forced-growth test small
    dist = ZetaDistribution(1.5)

    class TailRng:
        def random(self, n):
            return np.full(n, 1.0 - 1e-16)  # beyond any capped table

        def integers(self, *a, **k):
            return np.zeros(k["size"], dtype=np.int64)

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        draws = dist.sample(3, TailRng())
    assert dist.truncations == 3
    assert dist.pairs_tabulated == 1024
    assert np.all(draws == 2 * 1024)
    assert any("truncated" in str(w.message) for w in caught)


def test_trial_rng_prefix_stable():
    # same (master, index) -> same stream; different index -> different
    a = trial_rng(7, 3).random(8)
    b = trial_rng(7, 3).random(8)
    c = trial_rng(7, 4).random(8)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_sample_dataset_deterministic_and_labeled():
    S = sample_dataset(INST, 1.5, 64, 42)
    T = sample_dataset(INST, 1.5, 64, 42)
    assert S.points == T.points and S.labels == T.labels
    assert len(S) == 64
    assert S.provenance.startswith("sampled(")
    for pt, lb in zip(S.points, S.labels):
        assert classify(INST, pt) == lb
        k = grid_index(INST, pt[0])
        assert k is not None
        assert pt[1] == (INST.delta if k % 2 == 0 else F(0))


def test_enumerate_dataset():
    S = enumerate_dataset(INST, 5)
    assert len(S) == 5
    assert [grid_index(INST, p[0]) for p in S.points] == [1, 2, 3, 4, 5]
    T = enumerate_dataset(INST, 5, k_min=3)
    assert [grid_index(INST, p[0]) for p in T.points] == [3, 4, 5]


# ---------------------------------------------------------------------------
# separation certificate


def test_well_separated_grid_prefix():
    S = enumerate_dataset(INST, 5)
    ok, witness = is_well_separated(INST, S, separation_radius(5))
    assert ok and witness is None


def test_separation_violated_by_large_radius():
    S = enumerate_dataset(INST, 5)
    # consecutive first coordinates are closer than this radius demands
    ok, witness = is_well_separated(INST, S, F(1, 10))
    assert not ok
    assert witness["kind"] in ("pairwise-distance", "stability", "domain")


def test_stability_violated_even_for_distant_points():
    # two far-apart points, but a breakpoint a/m inside the radius of one:
    # x1 = 1/2 has the breakpoint m=1 at distance 0 ... use x1 slightly off
    inst = ProblemInstance(a=F(1, 2), kappa=F(1, 2), delta=F(0), d=2)
    S = enumerate_dataset(inst, 1)  # single point x1 = 1/3, breakpoint at 1/4 and 1/2
    ok, witness = is_well_separated(inst, S, F(1, 12) + F(1, 1000))
    assert not ok and witness["kind"] == "stability"
    ok2, _ = is_well_separated(inst, S, F(1, 13))
    assert ok2


def test_duplicate_points_allowed():
    S = enumerate_dataset(INST, 3)
    dup = type(S)(points=S.points + (S.points[0],), labels=S.labels + (S.labels[0],), provenance="x")
    ok, _ = is_well_separated(INST, dup, separation_radius(3))
    assert ok  # multiset semantics: identical points are not a violating pair


def test_dataset_json_roundtrip():
    S = sample_dataset(INST, 1.5, 16, 3)
    doc = json.loads(json.dumps(dataset_to_json(INST, S)))
    inst2, S2 = dataset_from_json(doc)
    assert inst2 == INST
    assert S2.points == S.points and S2.labels == S.labels
    assert S2.provenance == S.provenance


# ---------------------------------------------------------------------------
# cost catalogue


def test_cost_eval_kinds():
    v = [F(1, 4), F(3, 4)]
    w = [F(0), F(1)]
    assert cost_eval("mean_square", v, w) == (F(1, 16) + F(1, 16)) / 2
    assert cost_eval("mean_absolute", v, w) == F(1, 4)
    rms = cost_eval("root_mean_square", v, w)
    assert rms == pytest.approx(math.sqrt(2 * (1 / 16)) / 2)
    ce = cost_eval("cross_entropy", v, w)
    assert ce == pytest.approx(-0.5 * (math.log(3 / 4) + math.log(3 / 4)))


def test_cross_entropy_edge_cases():
    assert cost_eval("cross_entropy", [F(0)], [F(0)]) == 0.0  # 0*log0 = 0
    assert cost_eval("cross_entropy", [F(0)], [F(1)]) == math.inf
    assert cost_eval("cross_entropy", [F(3, 2)], [F(1)]) == math.inf  # outside [0,1]


def test_cf_eps_bound():
    assert cf_eps_bound("mean_square", 6, F(1, 96)) == 0.25  # sqrt(6/96), exact in floats
    assert cf_eps_bound("mean_absolute", 4, F(1, 8)) == F(1, 2)
    assert cf_eps_bound("root_mean_square", 4, F(1, 8)) == F(1, 2)
    assert cf_eps_bound("cross_entropy", 2, 0.5) == pytest.approx(1 - math.exp(-1))
    with pytest.raises(ValueError):
        cf_eps_bound("mean_square", 0, F(1, 2))
