"""Collapsing a network to an affine function along a decreasing line.

Points (t_1, y), (t_2, y), ... with a shared tail y and strictly decreasing
first coordinates are ordered by that coordinate. Every hidden unit's
preactivation is affine in t, so along the ordered points its sign changes
at most once, and the layer's sign patterns form at most N+1 runs of
consecutive points. Fixing the earliest longest run fixes the relu mask, so
the layer acts affinely there; chaining through all hidden layers leaves a
contiguous segment of at least |R| / prod(N_l + 1) points on which the whole
network is one affine function of t. On that segment a monotone readout is
monotone in t, which pins down a guaranteed number of misclassified points
whenever the true labels alternate.

All arithmetic is exact; the affine form is re-checked against direct
network evaluation point by point.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .monotone import MonotoneMap
from .network import EXACT_MODE, AffineLayer, ReluNetwork, eval_network
from .ratio import as_ratio


def _sign(value: Fraction) -> int:
    """Sign with sgn(0) = +1, matching 'unit active at zero preactivation'."""
    return -1 if value < 0 else 1


@dataclass(frozen=True)
class LayerTrace:
    """What one reduction step did: pattern runs seen and the run kept."""

    layer: int
    width: int
    n_runs: int
    kept_start: int  # offsets into the window entering this layer
    kept_length: int
    pattern: tuple


@dataclass(frozen=True)
class CollapseResult:
    """A contiguous segment of the line on which the network is affine."""

    indices: tuple  # surviving global indices, in line order
    slope: Fraction
    intercept: Fraction
    traces: tuple
    source_size: int
    width_product: int  # prod of (N_l + 1) over hidden layers

    def value_at(self, t) -> Fraction:
        return self.slope * as_ratio(t) + self.intercept


@dataclass(frozen=True)
class MisclassifiedSet:
    """Points the thresholded readout provably gets wrong."""

    indices: tuple
    guarantee: int  # the count promised in advance; len(indices) >= guarantee
    segment: CollapseResult


def _validate_line(points: Sequence) -> list:
    """Check the decreasing-line precondition; return the t values."""
    if len(points) < 1:
        raise ValueError("need at least one point")
    tail = tuple(points[0][1:])
    ts = []
    for i, p in enumerate(points):
        if tuple(p[1:]) != tail:
            raise ValueError(f"point {i} leaves the line: coordinates beyond the first differ")
        ts.append(as_ratio(p[0]))
        if i and not ts[i - 1] > ts[i]:
            raise ValueError(f"first coordinates must strictly decrease, violated at point {i}")
    return ts


def reduce_layer(layer: AffineLayer, u: Sequence, z: Sequence, ts: Sequence) -> tuple:
    """One relu layer applied to the affine state h(t) = u*t + z over the
    ordered points ts.

    Returns (u', z', start, length, trace-fields) where [start, start+length)
    is the earliest longest constant-sign-pattern run and (u', z') is the
    masked affine state valid on it.
    """
    slopes = []
    icepts = []
    for row, b in zip(layer.weights, layer.biases):
        slopes.append(sum((w * uc for w, uc in zip(row, u)), start=Fraction(0)))
        icepts.append(sum((w * zc for w, zc in zip(row, z)), start=Fraction(0)) + b)

    patterns = [tuple(_sign(s * t + c) for s, c in zip(slopes, icepts)) for t in ts]
    for i in range(len(slopes)):
        changes = sum(1 for j in range(1, len(ts)) if patterns[j][i] != patterns[j - 1][i])
        if changes > 1:
            raise AssertionError(f"unit {i} changed sign {changes} times along a monotone line")

    runs = []  # (start, length)
    start = 0
    for j in range(1, len(ts) + 1):
        if j == len(ts) or patterns[j] != patterns[j - 1]:
            runs.append((start, j - start))
            start = j
    if len(runs) > layer.out_dim + 1:
        raise AssertionError(f"{len(runs)} pattern runs on a line through a width-{layer.out_dim} layer")

    best_start, best_len = runs[0]
    for s, n in runs[1:]:
        if n > best_len:
            best_start, best_len = s, n
    mask = patterns[best_start]
    u_new = [sl if m > 0 else Fraction(0) for sl, m in zip(slopes, mask)]
    z_new = [ic if m > 0 else Fraction(0) for ic, m in zip(icepts, mask)]
    return u_new, z_new, best_start, best_len, len(runs), mask


def collapse_on_line(net: ReluNetwork, points: Sequence, indices: Optional[Sequence[int]] = None) -> CollapseResult:
    """Run the reduction through all hidden layers and certify the result.

    `indices` names the points globally (defaults to 0..n-1); the returned
    segment keeps those names. The affine form is verified exactly against
    eval_network at every surviving point.
    """
    if net.scalar_mode != EXACT_MODE:
        raise ValueError("line collapse is exact-only; convert the network first")
    ts_all = _validate_line(points)
    names = tuple(range(len(points))) if indices is None else tuple(indices)
    if len(names) != len(points):
        raise ValueError("indices and points must align")

    d = net.dims[0]
    if len(points[0]) != d:
        raise ValueError(f"points have {len(points[0])} coordinates, network expects {d}")
    u = [Fraction(1)] + [Fraction(0)] * (d - 1)
    z = [Fraction(0)] + [as_ratio(c) for c in points[0][1:]]

    lo, hi = 0, len(points)
    traces = []
    width_product = 1
    for li, layer in enumerate(net.layers[:-1]):
        width_product *= layer.out_dim + 1
        u, z, start, length, n_runs, mask = reduce_layer(layer, u, z, ts_all[lo:hi])
        traces.append(
            LayerTrace(
                layer=li + 1,
                width=layer.out_dim,
                n_runs=n_runs,
                kept_start=start,
                kept_length=length,
                pattern=mask,
            )
        )
        lo, hi = lo + start, lo + start + length

    last = net.layers[-1]
    slope = sum((w * uc for w, uc in zip(last.weights[0], u)), start=Fraction(0))
    icept = sum((w * zc for w, zc in zip(last.weights[0], z)), start=Fraction(0)) + last.biases[0]

    if (hi - lo) * width_product < len(points):
        raise AssertionError(
            f"segment of {hi - lo} points misses the pigeonhole bound "
            f"{len(points)}/{width_product}"
        )
    for j in range(lo, hi):
        direct = eval_network(net, points[j])
        if direct != slope * ts_all[j] + icept:
            raise AssertionError(f"affine collapse disagrees with the network at point {names[j]}")

    return CollapseResult(
        indices=names[lo:hi],
        slope=slope,
        intercept=icept,
        traces=tuple(traces),
        source_size=len(points),
        width_product=width_product,
    )


def line_sign_patterns(net: ReluNetwork, points: Sequence) -> list:
    """Per-point tuples of per-hidden-layer sign patterns (full forward pass,
    no reduction). Mostly a test surface for the run-count invariants."""
    if net.scalar_mode != EXACT_MODE:
        raise ValueError("sign patterns are exact-only")
    _validate_line(points)
    out = []
    for p in points:
        values = [as_ratio(c) for c in p]
        pats = []
        for layer in net.layers[:-1]:
            pre = [
                sum((w * v for w, v in zip(row, values)), start=Fraction(0)) + b
                for row, b in zip(layer.weights, layer.biases)
            ]
            pats.append(tuple(_sign(x) for x in pre))
            values = [x if x > 0 else Fraction(0) for x in pre]
        out.append(tuple(pats))
    return out


def extract_misclassified(
    net: ReluNetwork,
    g: MonotoneMap,
    points: Sequence,
    labels: Sequence[int],
    indices: Optional[Sequence[int]] = None,
) -> MisclassifiedSet:
    """Produce at least floor(len(points) / (3 * prod(N_l + 1))) points whose
    thresholded readout g(net(x)) disagrees with their label.

    Preconditions: points lie on a decreasing line and labels alternate along
    it. The reduction leaves a contiguous segment where g(net(x)) is monotone
    in the line parameter, so its thresholding switches at most once while
    the labels keep alternating; counting the two constant stretches yields
    the guarantee. Every returned point is re-verified by exact evaluation;
    readout ties count as class 1.
    """
    ts = _validate_line(points)
    if len(labels) != len(points):
        raise ValueError("labels and points must align")
    for i in range(1, len(labels)):
        if labels[i] == labels[i - 1]:
            raise ValueError(f"labels must alternate along the line, violated at point {i}")
    if any(lb not in (0, 1) for lb in labels):
        raise ValueError("labels must be 0/1")

    segment = collapse_on_line(net, points, indices)
    width_product = segment.width_product
    m = len(points) // (3 * width_product)
    if m < 1:
        raise ValueError(
            f"{len(points)} points cannot force a misclassification through "
            f"a width product of {width_product}; need at least {3 * width_product}"
        )

    names = tuple(range(len(points))) if indices is None else tuple(indices)
    pos = {name: j for j, name in enumerate(names)}
    bad = []
    for name in segment.indices:
        j = pos[name]
        value = eval_network(net, points[j])
        if value != segment.value_at(ts[j]):
            raise AssertionError(f"affine segment value drifted at point {name}")
        predicted = 1 if g.cmp_half(value) >= 0 else 0
        if predicted != labels[j]:
            bad.append(name)

    if len(bad) < m:
        raise AssertionError(f"found {len(bad)} misclassified points, promised {m}")
    return MisclassifiedSet(indices=tuple(bad), guarantee=m, segment=segment)


def collapse_trace_text(result: CollapseResult) -> str:
    """Human-readable trace of a collapse, stable across runs."""
    lines = [
        f"line collapse: {result.source_size} points in, "
        f"{len(result.indices)} out, width product {result.width_product}"
    ]
    for tr in result.traces:
        lines.append(
            f"layer {tr.layer}: width {tr.width}, {tr.n_runs} pattern runs, "
            f"kept [{tr.kept_start}, {tr.kept_start + tr.kept_length}) "
            f"pattern {''.join('+' if s > 0 else '-' for s in tr.pattern)}"
        )
    lines.append(f"affine form: ({result.slope}) * t + ({result.intercept})")
    lines.append(f"segment indices: {', '.join(str(i) for i in result.indices)}")
    return "\n".join(lines) + "\n"
