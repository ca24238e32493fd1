"""Hand-built networks over a problem instance.

Two constructions with opposite stability behavior:

* an unstable matcher that labels every grid point correctly by reading the
  delta marker in the second coordinate, at any requested depth, and is
  defeated by one perturbation independent of the point;
* a stable classifier that reads only the first coordinate and is constant
  on a certified interval around each grid point.

Plus exact attack verification against a labeled multiset (CSV artifact).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .network import EXACT_MODE, ReluNetwork, eval_network, make_layer, make_network
from .problem import LabeledMultiset, ProblemInstance, grid_index, grid_point
from .ratio import as_ratio, format_ratio

HALF = Fraction(1, 2)


# ---------------------------------------------------------------------------
# unstable matcher


def build_unstable_matcher(inst: ProblemInstance, dims: Sequence[int]) -> ReluNetwork:
    """Network of the requested dims computing max(x2/delta, 0).

    First layer routes x2/delta into unit 0; every later layer passes unit 0
    through. All biases are zero. Output equals the grid label at every grid
    point of the instance, for every k.
    """
    dims = tuple(int(n) for n in dims)
    if len(dims) < 3:
        raise ValueError("matcher needs at least one hidden layer")
    if dims[0] != inst.d or dims[-1] != 1:
        raise ValueError(f"matcher dims must run from {inst.d} inputs to 1 output, got {dims}")
    if inst.delta == 0:
        raise ValueError("matcher requires delta > 0")
    layers = []
    first = [[Fraction(0)] * dims[0] for _ in range(dims[1])]
    first[0][1] = 1 / inst.delta
    layers.append(make_layer(first, [Fraction(0)] * dims[1]))
    for depth in range(2, len(dims)):
        rows = [[Fraction(0)] * dims[depth - 1] for _ in range(dims[depth])]
        rows[0][0] = Fraction(1)
        layers.append(make_layer(rows, [Fraction(0)] * dims[depth]))
    return make_network(layers, EXACT_MODE)


# ---------------------------------------------------------------------------
# perturbations


@dataclass(frozen=True)
class Perturbation:
    """A single additive input perturbation (exact entries)."""

    entries: tuple
    target_parity: str  # "even" or "odd": which grid parity it aims at

    @property
    def norm(self) -> Fraction:
        """l-infinity size."""
        return max((abs(e) for e in self.entries), default=Fraction(0))


def make_perturbation(inst: ProblemInstance, omega, parity: str) -> Perturbation:
    """The universal attack vector: (omega, -delta, 0, ...) against even-k
    points, (omega, 0, ...) against odd-k points."""
    omega = as_ratio(omega)
    if parity not in ("even", "odd"):
        raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")
    second = -inst.delta if parity == "even" else Fraction(0)
    entries = (omega, second) + (Fraction(0),) * (inst.d - 2)
    return Perturbation(entries=entries, target_parity=parity)


# ---------------------------------------------------------------------------
# stable classifier


@dataclass(frozen=True)
class AlphaSequence:
    """Strictly decreasing breakpoints inside (0, 1)."""

    values: tuple

    def __post_init__(self):
        vals = tuple(as_ratio(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        for i, v in enumerate(vals):
            if not 0 < v < 1:
                raise ValueError(f"alpha {i + 1} = {v} lies outside (0, 1)")
            if i and not vals[i - 1] > v:
                raise ValueError(f"alphas must strictly decrease, violated at index {i + 1}")

    def __len__(self) -> int:
        return len(self.values)

    def alpha(self, k: int) -> Fraction:
        """1-indexed accessor."""
        return self.values[k - 1]


def stable_alphas(inst: ProblemInstance, n: int, eps_rad) -> AlphaSequence:
    """Breakpoints bracketing the first n grid points: alpha(2k-1) and
    alpha(2k) are the k-th first coordinate shifted by +-eps_rad.

    Requires 2*eps_rad < 1/(2*(n+1-kappa)*(n-kappa)), which keeps every
    bracket disjoint from its neighbors (the consecutive grid gap is
    a/((n-kappa)*(n+1-kappa)) at its smallest and a >= 1/2).
    """
    eps_rad = as_ratio(eps_rad)
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    if eps_rad <= 0:
        raise ValueError(f"need eps_rad > 0, got {eps_rad}")
    bound = 1 / (2 * (n + 1 - inst.kappa) * (n - inst.kappa))
    if not 2 * eps_rad < bound:
        raise ValueError(f"2*eps_rad = {2 * eps_rad} is not below the disjointness bound {bound}")
    vals = []
    for k in range(1, n + 1):
        x1 = grid_point(inst, k)[0]
        vals.append(x1 + eps_rad)
        vals.append(x1 - eps_rad)
    return AlphaSequence(values=tuple(vals))


def build_stable_classifier(alphas: AlphaSequence, d: int) -> ReluNetwork:
    """One-hidden-layer network in t = x1, constant on the certified
    intervals of the alphas.

    Hidden unit for breakpoint alpha computes relu(alpha - t). Units come in
    blocks of four with breakpoint indices (4l-2, 4l-1, 4l, 4l+1): the first
    pair ramps the output 0 -> 1 as t falls through [alpha(4l-1),
    alpha(4l-2)], the second ramps it back down through [alpha(4l+1),
    alpha(4l)]. Index 1 is never used and one breakpoint at 0 is adjoined for
    the last block; a count of 2 mod 4 is padded with alpha(K)/2 and
    alpha(K)/4 below everything of interest.
    """
    if d < 2:
        raise ValueError(f"d must be >= 2, got {d}")
    K = len(alphas)
    if K % 2 or K < 2:
        raise ValueError(f"need a positive even number of breakpoints, got {K}")
    vals = list(alphas.values)
    if K % 4 == 2:
        vals.append(vals[-1] / 2)
        vals.append(vals[-1] / 2)  # alpha(K)/4
    vals.append(Fraction(0))
    width = len(vals) - 1  # everything except the unused alpha(1)

    rows = []
    biases = []
    coeffs = []
    for block_start in range(1, width, 4):  # 0-indexed positions 4l-3 of alpha(4l-2)
        a_up_hi = vals[block_start]
        a_up_lo = vals[block_start + 1]
        a_dn_hi = vals[block_start + 2]
        a_dn_lo = vals[block_start + 3]
        g_up = 1 / (a_up_hi - a_up_lo)
        g_dn = 1 / (a_dn_hi - a_dn_lo)
        for bias, coeff in ((a_up_hi, g_up), (a_up_lo, -g_up), (a_dn_hi, -g_dn), (a_dn_lo, g_dn)):
            rows.append([Fraction(-1)] + [Fraction(0)] * (d - 1))
            biases.append(bias)
            coeffs.append(coeff)
    hidden = make_layer(rows, biases)
    output = make_layer([coeffs], [Fraction(0)])
    return make_network([hidden, output], EXACT_MODE)


def certified_intervals(alphas: AlphaSequence) -> list:
    """[(lo, hi, value)]: the classifier is exactly `value` on each closed
    first-coordinate interval [lo, hi] = [alpha(k), alpha(k-1)], value 0 for
    k = 2 mod 4 and 1 for k = 0 mod 4."""
    out = []
    for k in range(2, len(alphas) + 1, 2):
        out.append((alphas.alpha(k), alphas.alpha(k - 1), 0 if k % 4 == 2 else 1))
    return out


# ---------------------------------------------------------------------------
# attack verification


@dataclass(frozen=True)
class AttackRow:
    point_index: int
    k: Optional[int]
    label: int
    output: Fraction
    perturbed_output: Optional[Fraction]  # None: perturbed point left the domain
    error: Optional[Fraction]
    flipped: Optional[bool]


@dataclass(frozen=True)
class AttackReport:
    perturbation: Perturbation
    rows: tuple
    flipped_indices: tuple
    domain_exits: int

    @property
    def flipped_count(self) -> int:
        return len(self.flipped_indices)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["point index", "k", "label", "output", "perturbed output", "error", "flipped"])
        for r in self.rows:
            writer.writerow(
                [
                    r.point_index,
                    "" if r.k is None else r.k,
                    r.label,
                    format_ratio(r.output),
                    "" if r.perturbed_output is None else format_ratio(r.perturbed_output),
                    "" if r.error is None else format_ratio(r.error),
                    "" if r.flipped is None else ("true" if r.flipped else "false"),
                ]
            )
        return buf.getvalue()


def _threshold(value: Fraction) -> int:
    return 1 if value >= HALF else 0


def verify_attack(
    inst: ProblemInstance,
    net: ReluNetwork,
    S: LabeledMultiset,
    pert: Perturbation,
    budget=None,
) -> AttackReport:
    """Evaluate net exactly at each point of S and at the perturbed point;
    a row is flipped when the thresholded perturbed output disagrees with
    the label. Perturbed points with first coordinate <= 0 fall outside the
    classifier's domain and are recorded with empty fields instead.
    """
    if net.scalar_mode != EXACT_MODE:
        raise ValueError("attack verification is exact-only; use the training verifier for float networks")
    if budget is not None and not pert.norm < as_ratio(budget):
        raise ValueError(f"perturbation norm {pert.norm} is not strictly below the budget {budget}")
    if len(pert.entries) != inst.d:
        raise ValueError(f"perturbation has {len(pert.entries)} entries, instance has d = {inst.d}")
    rows = []
    flipped = []
    exits = 0
    for i, (pt, label) in enumerate(zip(S.points, S.labels)):
        out = eval_network(net, pt)
        moved = tuple(c + e for c, e in zip(pt, pert.entries))
        if moved[0] <= 0:
            exits += 1
            rows.append(AttackRow(i, grid_index(inst, pt[0]), label, out, None, None, None))
            continue
        out_moved = eval_network(net, moved)
        err = abs(out_moved - label)
        flip = _threshold(out_moved) != label
        if flip:
            flipped.append(i)
        rows.append(AttackRow(i, grid_index(inst, pt[0]), label, out, out_moved, err, flip))
    return AttackReport(
        perturbation=pert,
        rows=tuple(rows),
        flipped_indices=tuple(flipped),
        domain_exits=exits,
    )
