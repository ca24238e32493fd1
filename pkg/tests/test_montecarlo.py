import json
import math
from fractions import Fraction as F

import numpy as np
import pytest

from relulab.montecarlo import (
    reports_summary,
    reports_to_csv,
    summary_to_json,
    verify_alternation_bound,
    verify_max_bound,
    verify_theorem_event,
    verify_unique_count,
)
from relulab.problem import (
    ProblemInstance,
    ZetaDistribution,
    distribution_constants,
    theorem_constant,
    trial_rng,
)

INST = ProblemInstance(a=F(1, 2), kappa=F(1, 2), delta=F(1, 100), d=2)

# frozen reference values (mpmath, 30 digits)
UNIQUE_BOUND_1E6 = 0.604560967762755
MAX_BOUND_100_1E6 = 0.891729680952264


def test_unique_count_bound_formula():
    # defect c1^-2 * theta^-(2/gamma - 1); bound = 1 - defect
    r = verify_unique_count(1.5, 10**6, 2, seed=0)
    assert r.bound == pytest.approx(UNIQUE_BOUND_1E6, abs=1e-9)
    c1, _ = distribution_constants(1.5)
    assert r.extras["threshold"] == pytest.approx(c1 * (10**6) ** (2 / 3))


def test_unique_count_vacuous_at_small_theta():
    r = verify_unique_count(1.5, 10**3, 5, seed=0)
    assert r.verdict == "vacuous"
    assert r.bound is None


def test_unique_count_passes_at_scale():
    r = verify_unique_count(1.5, 10**5, 60, seed=11)
    assert r.verdict == "pass"
    assert r.empirical == 1.0  # N concentrates far above the threshold


def test_max_bound_formula_and_pass():
    r = verify_max_bound(1.5, 100, 10**6, 400, seed=2)
    assert r.bound == pytest.approx(MAX_BOUND_100_1E6, abs=1e-9)
    assert r.verdict == "pass"
    # empirical should be near the true value (1 - tail)^theta
    dist = ZetaDistribution(1.5)
    p_true = dist.cdf_point(10**6) ** 100
    assert abs(r.empirical - p_true) <= 4 * math.sqrt(p_true * (1 - p_true) / 400) + 1e-3


def test_max_bound_closed_form_cross_check():
    # P(max of theta draws <= 2) = cdf(2)^theta exactly; small but not tiny
    theta, trials = 3, 4000
    dist = ZetaDistribution(1.5)
    p = dist.cdf_point(2) ** theta
    hits = 0
    for i in range(trials):
        draws = dist.sample(theta, trial_rng(77, i))
        hits += int(draws.max() <= 2)
    emp = hits / trials
    assert abs(emp - p) < 4 * math.sqrt(p * (1 - p) / trials)


def test_max_bound_vacuous_cases():
    assert verify_max_bound(1.5, 100, 1, 5, seed=0).verdict == "vacuous"  # n//2 < 1
    assert verify_max_bound(1.5, 10**4, 4, 5, seed=0).verdict == "vacuous"  # defect >= 1


def test_alternation_bound_buckets():
    # theta = 10^3 concentrates the distinct count enough that 3000 trials
    # fill qualifying buckets above the floor
    r = verify_alternation_bound(1.5, 10**3, 30, 3000, seed=3)
    assert r.extras["total_trials"] == 3000
    assert r.operation == "alternation-bound"
    assert r.verdict == "pass"
    assert r.extras["buckets"]
    for row in r.extras["buckets"]:
        assert row["trials"] >= 100 and row["n"] >= 30
        assert row["empirical"] <= row["bound"] + row["slack"]


def test_alternation_bound_insufficient_data():
    # 30 trials cannot fill any 100-trial bucket
    r = verify_alternation_bound(1.5, 10**4, 100, 30, seed=4)
    assert r.verdict == "insufficient-data"
    assert r.bound is None


def test_alternation_precondition():
    with pytest.raises(ValueError):
        verify_alternation_bound(1.5, 10**4, 5, 10, seed=0)  # n_min < 10
    with pytest.raises(ValueError):
        verify_alternation_bound(1.5, 100, 200, 10, seed=0)  # n_min > theta


def test_theorem_event_infeasible_at_derived_constant():
    r = verify_theorem_event(INST, 1.5, 200, 200, 0.5, 1, seed=0)
    assert r.verdict == "infeasible-at-desk-scale"
    assert r.bound is None
    assert r.extras["required_r_plus_s"] > 400
    assert r.extras["required_r_plus_s"] == pytest.approx(
        theorem_constant() * max(0.5**-3, 2**1.5), rel=1e-12
    )


def test_theorem_event_surrogate_is_observational():
    r = verify_theorem_event(INST, 1.5, 150, 150, 0.5, 40, seed=5, surrogate_C=1.0)
    assert r.verdict == "observational"
    assert r.bound == pytest.approx(0.5)
    assert 0.0 <= r.empirical <= 1.0
    assert set(r.extras) >= {"freq_max_ok", "freq_alt_ok", "required_r_plus_s"}


def test_theorem_event_assertion_mode_at_p_one():
    # p = 1 drops the required sample size to C * (q * width_product)^1.5,
    # within desk reach; the certified bound 1 - p = 0 must then pass
    C = theorem_constant()
    required = int(math.ceil(C * 2**1.5))
    r_draws = required // 2 + 1
    rep = verify_theorem_event(INST, 1.5, r_draws, r_draws, 1.0, 1, seed=6)
    assert rep.verdict == "pass"
    assert rep.bound == 0.0


def test_reports_csv_and_summary_deterministic():
    a1 = verify_max_bound(1.5, 50, 10**4, 60, seed=9)
    a2 = verify_max_bound(1.5, 50, 10**4, 60, seed=9)
    assert reports_to_csv([a1]) == reports_to_csv([a2])
    assert summary_to_json([a1]) == summary_to_json([a2])
    csv = reports_to_csv([a1])
    assert csv.splitlines()[0] == "operation,params,trials,empirical,bound,slack,verdict"
    doc = json.loads(summary_to_json([a1]))
    assert "all_pass" in doc
    summary = reports_summary([a1])
    assert summary["reports"][0]["operation"] == "max-bound"


def test_low_power_flag():
    r = verify_max_bound(1.5, 50, 10**4, 4, seed=10)
    assert "low-power" in r.flags
