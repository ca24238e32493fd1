"""Monotone read-out maps applied to the scalar network output.

The classifier comparisons in this package only ever need the sign of
g(y) - 1/2, and for every supported kind that sign is computable exactly on
rational inputs, including the logistic map, where g(y) >= 1/2 iff y >= 0.
Full exact evaluation is available for the piecewise kinds (identity, affine,
threshold, step); the logistic map evaluates in float only.

Kinds and their config spellings:

    identity                     g(y) = y
    threshold                    g(y) = 1 if y >= 1/2 else 0
    logistic                     g(y) = 1/(1+exp(-y))
    affine:slope:intercept       g(y) = slope*y + intercept, slope >= 0
    step:t1,t2,...:v0,v1,...     right-closed steps: g(t_i) = v_{i+1}
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .ratio import as_ratio

HALF = Fraction(1, 2)


def _cmp(a, b) -> int:
    if a > b:
        return 1
    if a < b:
        return -1
    return 0


@dataclass(frozen=True)
class MonotoneMap:
    kind: str
    slope: Fraction = Fraction(1)
    intercept: Fraction = Fraction(0)
    thresholds: tuple = field(default_factory=tuple)
    values: tuple = field(default_factory=tuple)

    @property
    def is_exact(self) -> bool:
        """Whether __call__ is exact on rational inputs."""
        return self.kind != "logistic"

    @property
    def is_differentiable(self) -> bool:
        return self.kind in ("identity", "affine", "logistic")

    def __call__(self, y):
        if self.kind == "identity":
            return y
        if self.kind == "affine":
            return self.slope * y + self.intercept
        if self.kind in ("threshold", "step"):
            idx = bisect_right(self.thresholds, y)
            return self.values[idx]
        return 1.0 / (1.0 + math.exp(-float(y)))

    def cmp_half(self, y) -> int:
        """Sign of g(y) - 1/2, exact for every kind on rational (or float) y."""
        if self.kind == "identity":
            return _cmp(y, HALF)
        if self.kind == "affine":
            return _cmp(self.slope * y + self.intercept, HALF)
        if self.kind in ("threshold", "step"):
            return _cmp(self(y), HALF)
        return _cmp(y, 0)

    def apply_batch(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        if self.kind == "identity":
            return y
        if self.kind == "affine":
            return float(self.slope) * y + float(self.intercept)
        if self.kind in ("threshold", "step"):
            idx = np.searchsorted([float(t) for t in self.thresholds], y, side="right")
            return np.asarray([float(v) for v in self.values])[idx]
        return 1.0 / (1.0 + np.exp(-y))

    def deriv_batch(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        if self.kind == "identity":
            return np.ones_like(y)
        if self.kind == "affine":
            return np.full_like(y, float(self.slope))
        if self.kind == "logistic":
            g = 1.0 / (1.0 + np.exp(-y))
            return g * (1.0 - g)
        raise ValueError(f"{self.kind} read-out has no derivative; not trainable")

    def spec_string(self) -> str:
        if self.kind == "affine":
            return f"affine:{self.slope}:{self.intercept}"
        if self.kind == "step":
            ts = ",".join(str(t) for t in self.thresholds)
            vs = ",".join(str(v) for v in self.values)
            return f"step:{ts}:{vs}"
        return self.kind


def identity_map() -> MonotoneMap:
    return MonotoneMap(kind="identity")


def threshold_map() -> MonotoneMap:
    return MonotoneMap(kind="threshold", thresholds=(HALF,), values=(Fraction(0), Fraction(1)))


def logistic_map() -> MonotoneMap:
    return MonotoneMap(kind="logistic")


def affine_map(slope, intercept) -> MonotoneMap:
    slope = as_ratio(slope)
    if slope < 0:
        raise ValueError("affine read-out needs slope >= 0 to stay monotone")
    return MonotoneMap(kind="affine", slope=slope, intercept=as_ratio(intercept))


def step_map(thresholds, values) -> MonotoneMap:
    ts = tuple(as_ratio(t) for t in thresholds)
    vs = tuple(as_ratio(v) for v in values)
    if len(vs) != len(ts) + 1:
        raise ValueError("step map needs len(values) == len(thresholds) + 1")
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise ValueError("step thresholds must strictly increase")
    if any(b < a for a, b in zip(vs, vs[1:])):
        raise ValueError("step values must be nondecreasing (monotone map)")
    return MonotoneMap(kind="step", thresholds=ts, values=vs)


def parse_monotone(spec: str) -> MonotoneMap:
    """Parse the config spelling of a read-out map."""
    parts = spec.strip().split(":")
    if parts[0] == "identity":
        return identity_map()
    if parts[0] == "threshold":
        return threshold_map()
    if parts[0] == "logistic":
        return logistic_map()
    if parts[0] == "affine" and len(parts) == 3:
        return affine_map(parts[1], parts[2])
    if parts[0] == "step" and len(parts) == 3:
        return step_map(parts[1].split(","), parts[2].split(","))
    raise ValueError(f"cannot parse read-out spec {spec!r}")
