"""The adversarial classification problem family and its sampling distribution.

A problem instance is parametrized by rationals a in [1/2, 1], kappa in
[1/4, 3/4], delta >= 0 and a dimension d >= 2. It induces

* the classifier f(x) = 1 iff ceil(a / x1) is odd (first coordinate only),
* the grid family x^(k) = (a/(k+1-kappa), 0, ..., 0) for odd k and
  (a/(k+1-kappa), delta, 0, ..., 0) for even k, whose labels alternate,
* a power-law sampling distribution placing equal masses on consecutive
  grid-point pairs,
* the cost-function catalogue used by the trainer and the oracle adversary.

Everything except the sampler runs on exact rationals.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .ratio import as_ratio, format_ratio, parse_ratio

# ---------------------------------------------------------------------------
# instance and classifier


@dataclass(frozen=True)
class ProblemInstance:
    a: Fraction
    kappa: Fraction
    delta: Fraction
    d: int

    def __post_init__(self):
        object.__setattr__(self, "a", as_ratio(self.a))
        object.__setattr__(self, "kappa", as_ratio(self.kappa))
        object.__setattr__(self, "delta", as_ratio(self.delta))
        if not Fraction(1, 2) <= self.a <= 1:
            raise ValueError(f"a must lie in [1/2, 1], got {self.a}")
        if not Fraction(1, 4) <= self.kappa <= Fraction(3, 4):
            raise ValueError(f"kappa must lie in [1/4, 3/4], got {self.kappa}")
        if self.delta < 0:
            raise ValueError(f"delta must be >= 0, got {self.delta}")
        if self.d < 2:
            raise ValueError(f"d must be >= 2, got {self.d}")


def classify_first(inst: ProblemInstance, x1) -> int:
    """f at a point with first coordinate x1 > 0: 1 iff ceil(a/x1) is odd."""
    x1 = as_ratio(x1)
    if x1 <= 0:
        raise ValueError("classifier undefined for first coordinate <= 0")
    return math.ceil(inst.a / x1) % 2


def classify(inst: ProblemInstance, x: Sequence) -> int:
    """f(x); depends only on the first coordinate."""
    return classify_first(inst, x[0])


def grid_point(inst: ProblemInstance, k: int) -> tuple:
    """k-th grid point; second coordinate carries the delta marker iff k even."""
    if k < 1:
        raise ValueError(f"grid index must be >= 1, got {k}")
    first = inst.a / (k + 1 - inst.kappa)
    second = inst.delta if k % 2 == 0 else Fraction(0)
    return (first, second) + (Fraction(0),) * (inst.d - 2)


def grid_index(inst: ProblemInstance, x1) -> Optional[int]:
    """Inverse of grid_point on first coordinates; None if x1 is off-grid."""
    x1 = as_ratio(x1)
    if x1 <= 0:
        return None
    k = inst.a / x1 - 1 + inst.kappa
    if k.denominator == 1 and k >= 1:
        return int(k)
    return None


def separation_radius(n: int) -> Fraction:
    """Stability radius of the first n grid points: 1/((4n+3)(4n+4))."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    return Fraction(1, (4 * n + 3) * (4 * n + 4))


def theorem_radius(C: float, n: float) -> float:
    """(C*n)^-4, the radius appearing in the headline claim."""
    if C <= 0 or n < 1:
        raise ValueError("need C > 0 and n >= 1")
    return float(C * n) ** -4


# ---------------------------------------------------------------------------
# power-law distribution constants

_NORMALIZER_TERMS = 10**6


@lru_cache(maxsize=None)
def zeta_normalizer(gamma: float) -> float:
    """1 / sum_{j>=1} j^-gamma, by 10^6-term partial sum plus the integral
    tail bracket midpoint (absolute error < 1e-8 on (1, 2))."""
    gamma = float(gamma)
    if not 1.0 < gamma < 2.0:
        raise ValueError(f"gamma must lie in (1, 2), got {gamma}")
    js = np.arange(1, _NORMALIZER_TERMS + 1, dtype=np.float64)
    partial = float(np.sum(js**-gamma))
    upper = _NORMALIZER_TERMS ** (1.0 - gamma) / (gamma - 1.0)
    lower = (_NORMALIZER_TERMS + 1) ** (1.0 - gamma) / (gamma - 1.0)
    return 1.0 / (partial + (upper + lower) / 2.0)


def distribution_constants(gamma: float) -> tuple:
    """(c1, c2) = ((1 - e^-normalizer)/2, normalizer/(gamma-1))."""
    c = zeta_normalizer(gamma)
    return (1.0 - math.exp(-c)) / 2.0, c / (float(gamma) - 1.0)


def theorem_constant() -> float:
    """max of the three lower bounds the headline claim places on its constant
    (evaluated at gamma = 3/2); approximately 3.96e6."""
    c1, c2 = distribution_constants(1.5)
    return max(
        4**3 * c1**-6,
        200.0 * math.log(8.0) ** 1.5 * c1**-1.5,
        4.0 * (8.0 * c2) ** 2,
    )


# ---------------------------------------------------------------------------
# sampling distribution

PAIR_CAP = 50_000_000  # point indices beyond 2*PAIR_CAP = 1e8 are truncated
_EXTEND_CHUNK = 1 << 23


class ZetaDistribution:
    """Masses p(2j-1) = p(2j) = (1/2) * normalizer * j^-gamma on point
    indices, sampled by inverse CDF over lazily extended pair partial sums.

    The pair table grows by doubling until the largest uniform draw is
    covered, capped at PAIR_CAP pairs; draws beyond the cap are truncated to
    the cap index (counted in .truncations, warned once). Growth is
    single-writer: clone per thread or guard externally if sampling
    concurrently.
    """

    def __init__(self, gamma: float, initial_pairs: int = 1 << 16):
        self.gamma = float(gamma)
        self.normalizer = zeta_normalizer(gamma)
        self.truncations = 0
        self._warned = False
        self._pair_cdf = np.empty(0, dtype=np.float64)
        self._extend_to(min(initial_pairs, PAIR_CAP))

    @property
    def pairs_tabulated(self) -> int:
        return len(self._pair_cdf)

    def _extend_to(self, target: int) -> None:
        target = min(int(target), PAIR_CAP)
        while len(self._pair_cdf) < target:
            lo = len(self._pair_cdf)
            hi = min(target, lo + _EXTEND_CHUNK)
            js = np.arange(lo + 1, hi + 1, dtype=np.float64)
            block = np.cumsum(self.normalizer * js**-self.gamma)
            if lo:
                block += self._pair_cdf[-1]
            self._pair_cdf = np.concatenate([self._pair_cdf, block])

    def mass(self, k: int) -> float:
        """Probability of point index k >= 1."""
        if k < 1:
            raise ValueError("point indices start at 1")
        j = (k + 1) // 2
        return 0.5 * self.normalizer * float(j) ** -self.gamma

    def cdf_point(self, k: int) -> float:
        """P(X <= k), extending the table as needed (k within the cap)."""
        if k < 1:
            return 0.0
        j = (k + 1) // 2
        if j > PAIR_CAP:
            raise ValueError(f"cdf probe beyond truncation cap {2 * PAIR_CAP}")
        self._extend_to(j)
        total = float(self._pair_cdf[j - 1])
        if k % 2 == 1:
            total -= self.mass(k)
        return total

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """n i.i.d. point indices. Consumes exactly two rng calls (uniforms,
        then parity bits), so the stream is independent of table state."""
        u = rng.random(n)
        parity = rng.integers(0, 2, size=n)
        if n:
            top = float(u.max())
            while top >= self._pair_cdf[-1] and len(self._pair_cdf) < PAIR_CAP:
                self._extend_to(len(self._pair_cdf) * 2)
        # two-stage search: almost all mass sits in the cache-resident prefix
        prefix = self._pair_cdf[: 1 << 16]
        pair0 = np.searchsorted(prefix, u, side="right")
        deep = pair0 >= len(prefix)
        if deep.any():
            pair0[deep] = np.searchsorted(self._pair_cdf, u[deep], side="right")
        overflow = pair0 >= len(self._pair_cdf)
        if overflow.any():
            self.truncations += int(overflow.sum())
            pair0[overflow] = len(self._pair_cdf) - 1
            if not self._warned:
                self._warned = True
                import warnings

                warnings.warn(
                    f"uniform draws beyond the tabulated tail were truncated to "
                    f"point index {2 * len(self._pair_cdf)} "
                    f"({self.truncations} so far)",
                    RuntimeWarning,
                )
        return 2 * (pair0 + 1) - parity


def trial_rng(master_seed: int, index: int) -> np.random.Generator:
    """Counter-based per-trial stream: Philox keyed by (master_seed, index).

    Streams are independent of how trials are batched or threaded, and the
    first t trials of a longer run coincide with a length-t run.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((int(master_seed), int(index)))))


# ---------------------------------------------------------------------------
# labeled multisets


@dataclass(frozen=True)
class LabeledMultiset:
    points: tuple
    labels: tuple
    provenance: str
    seed: Optional[int] = None
    theta: Optional[int] = None
    gamma: Optional[float] = None

    def __len__(self) -> int:
        return len(self.points)


def sample_dataset(inst: ProblemInstance, gamma: float, theta: int, seed: int) -> LabeledMultiset:
    """theta i.i.d. grid points drawn through the power-law distribution."""
    if theta < 1:
        raise ValueError(f"need theta >= 1, got {theta}")
    dist = ZetaDistribution(gamma)
    ks = dist.sample(theta, trial_rng(seed, 0))
    points = tuple(grid_point(inst, int(k)) for k in ks)
    labels = tuple(classify(inst, p) for p in points)
    return LabeledMultiset(
        points=points,
        labels=labels,
        provenance=f"sampled(seed={seed}, theta={theta}, gamma={gamma})",
        seed=int(seed),
        theta=int(theta),
        gamma=float(gamma),
    )


def enumerate_dataset(inst: ProblemInstance, k_max: int, k_min: int = 1) -> LabeledMultiset:
    """The grid points k_min..k_max, each once."""
    points = tuple(grid_point(inst, k) for k in range(k_min, k_max + 1))
    labels = tuple(classify(inst, p) for p in points)
    return LabeledMultiset(points=points, labels=labels, provenance=f"enumerated({k_min}..{k_max})")


def is_well_separated(inst: ProblemInstance, S: LabeledMultiset, delta_sep) -> tuple:
    """Exact check that S is well separated and stable at radius delta_sep.

    (a) distinct points are >= 2*delta_sep apart in l-infinity;
    (b) around each point, ceil(a/.) is constant on the open interval
        (x1 - delta_sep, x1 + delta_sep): no breakpoint a/m may fall inside,
        and the interval must stay right of 0 (the classifier's domain).

    Returns (True, None) or (False, witness-dict).
    """
    delta_sep = as_ratio(delta_sep)
    pts = S.points
    for pt in pts:
        if pt[0] <= 0:
            raise ValueError("well-separatedness is defined for first coordinates > 0")
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            if pts[i] == pts[j]:
                continue  # multiset semantics: equal points are not a pair
            dist = max(abs(u - v) for u, v in zip(pts[i], pts[j]))
            if dist < 2 * delta_sep:
                return False, {"kind": "pairwise-distance", "i": i, "j": j, "distance": dist}
    if delta_sep > 0:
        for i, pt in enumerate(pts):
            x1 = pt[0]
            if x1 - delta_sep <= 0:
                return False, {"kind": "domain", "index": i}
            m = math.floor(inst.a / (x1 + delta_sep)) + 1  # least integer > a/(x1+delta)
            if m * (x1 - delta_sep) < inst.a:  # i.e. m < a/(x1-delta): breakpoint inside
                return False, {"kind": "stability", "index": i, "breakpoint_m": m}
    return True, None


# ---------------------------------------------------------------------------
# dataset serialization


def dataset_to_json(inst: ProblemInstance, S: LabeledMultiset) -> dict:
    return {
        "instance": {
            "a": format_ratio(inst.a),
            "kappa": format_ratio(inst.kappa),
            "delta": format_ratio(inst.delta),
            "d": inst.d,
        },
        "provenance": S.provenance,
        "seed": S.seed,
        "theta": S.theta,
        "gamma": S.gamma,
        "points": [[format_ratio(c) for c in p] for p in S.points],
        "labels": list(S.labels),
    }


def dataset_from_json(doc: dict) -> tuple:
    inst = ProblemInstance(
        a=parse_ratio(doc["instance"]["a"]),
        kappa=parse_ratio(doc["instance"]["kappa"]),
        delta=parse_ratio(doc["instance"]["delta"]),
        d=int(doc["instance"]["d"]),
    )
    ds = LabeledMultiset(
        points=tuple(tuple(parse_ratio(c) for c in p) for p in doc["points"]),
        labels=tuple(int(v) for v in doc["labels"]),
        provenance=doc["provenance"],
        seed=doc.get("seed"),
        theta=doc.get("theta"),
        gamma=doc.get("gamma"),
    )
    return inst, ds


def save_dataset(inst: ProblemInstance, S: LabeledMultiset, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(dataset_to_json(inst, S), fh, indent=1)
        fh.write("\n")


def load_dataset(path) -> tuple:
    with open(path, "r", encoding="utf-8") as fh:
        return dataset_from_json(json.load(fh))


# ---------------------------------------------------------------------------
# cost functions

CROSS_ENTROPY = "cross_entropy"
MEAN_SQUARE = "mean_square"
ROOT_MEAN_SQUARE = "root_mean_square"
MEAN_ABSOLUTE = "mean_absolute"
COST_KINDS = (CROSS_ENTROPY, MEAN_SQUARE, ROOT_MEAN_SQUARE, MEAN_ABSOLUTE)


def cost_eval(kind: str, v: Sequence, w: Sequence):
    """The four catalogue costs of predicted v against target w.

    cross_entropy returns +inf outside [0,1]^r (0*log 0 = 0 convention);
    mean_square and mean_absolute are exact on rational inputs;
    root_mean_square is (1/r)*l2-norm (note: not the square root of
    mean_square) and evaluates in float.
    """
    if kind not in COST_KINDS:
        raise ValueError(f"unknown cost kind {kind!r}")
    if len(v) != len(w) or not v:
        raise ValueError("cost needs two equal-length nonempty vectors")
    r = len(v)
    if kind == CROSS_ENTROPY:
        total = 0.0
        for vj, wj in zip(v, w):
            if not 0 <= vj <= 1:
                return math.inf
            for weight, prob in ((wj, vj), (1 - wj, 1 - vj)):
                if weight == 0:
                    continue
                if prob == 0:
                    return math.inf
                total -= float(weight) * math.log(float(prob))
        return total / r
    if kind == MEAN_SQUARE:
        return sum((wj - vj) ** 2 for vj, wj in zip(v, w)) / r
    if kind == ROOT_MEAN_SQUARE:
        return math.sqrt(float(sum((wj - vj) ** 2 for vj, wj in zip(v, w)))) / r
    return sum(abs(wj - vj) for vj, wj in zip(v, w)) / r


def cf_eps_bound(kind: str, r: int, eps):
    """The l-infinity deviation that a cost value <= eps forces (binary
    targets for cross_entropy): mean_square -> sqrt(r*eps); root_mean_square
    and mean_absolute -> r*eps; cross_entropy -> 1 - exp(-r*eps)."""
    if kind not in COST_KINDS:
        raise ValueError(f"unknown cost kind {kind!r}")
    if r < 1 or eps <= 0:
        raise ValueError("need r >= 1 and eps > 0")
    if kind == MEAN_SQUARE:
        return math.sqrt(r * eps)
    if kind == CROSS_ENTROPY:
        return 1.0 - math.exp(-r * float(eps))
    return r * eps
