"""Fixed-architecture ReLU networks with exact-rational and float64 evaluation.

A network is a stack of affine layers with the ReLU nonlinearity applied
between layers (never after the last one). Output width is pinned to 1.

Two scalar modes exist and never mix inside one network:

* ``exact-rational``: every weight/bias is a Fraction; evaluation is exact.
  All constructions and verifications in this package run in this mode.
* ``float64``: every weight/bias is a Python float; evaluation uses numpy.
  Only the trainer and its attack search run in this mode.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .ratio import Scalar, as_ratio, format_ratio, parse_ratio

EXACT_MODE = "exact-rational"
FLOAT_MODE = "float64"


def relu(x: Scalar) -> Scalar:
    """ReLU on one scalar: x for x >= 0, else 0. Type preserving (0*x keeps
    Fraction inputs exact)."""
    return x if x > 0 else x * 0


@dataclass(frozen=True)
class AffineLayer:
    """One affine map x -> A x + b. weights has shape out_dim x in_dim."""

    weights: tuple
    biases: tuple

    @property
    def out_dim(self) -> int:
        return len(self.weights)

    @property
    def in_dim(self) -> int:
        return len(self.weights[0]) if self.weights else 0


@dataclass(frozen=True)
class ReluNetwork:
    layers: tuple
    scalar_mode: str = EXACT_MODE

    @property
    def dims(self) -> tuple:
        """(N_0, N_1, ..., N_L) read off the layer shapes."""
        return (self.layers[0].in_dim,) + tuple(lay.out_dim for lay in self.layers)

    @property
    def depth(self) -> int:
        return len(self.layers)


def make_layer(weights, biases) -> AffineLayer:
    return AffineLayer(
        weights=tuple(tuple(row) for row in weights),
        biases=tuple(biases),
    )


def make_network(layers: Sequence[AffineLayer], scalar_mode: str = EXACT_MODE) -> ReluNetwork:
    net = ReluNetwork(layers=tuple(layers), scalar_mode=scalar_mode)
    validate_network(net)
    return net


def _entry_ok(value, mode: str) -> bool:
    if mode == EXACT_MODE:
        return isinstance(value, (int, Fraction)) and not isinstance(value, bool)
    return isinstance(value, float) and math.isfinite(value)


def validate_network(net: ReluNetwork) -> tuple:
    """Check shape consistency, output width 1, and scalar-mode homogeneity.

    Returns the dims tuple as the certificate; raises ValueError naming the
    first offending layer otherwise.
    """
    if net.scalar_mode not in (EXACT_MODE, FLOAT_MODE):
        raise ValueError(f"unknown scalar_mode {net.scalar_mode!r}")
    if not net.layers:
        raise ValueError("network must have at least one layer")
    for idx, lay in enumerate(net.layers, start=1):
        if not lay.weights:
            raise ValueError(f"layer {idx}: empty weight matrix")
        width = len(lay.weights[0])
        for row in lay.weights:
            if len(row) != width:
                raise ValueError(f"layer {idx}: ragged weight matrix")
        if len(lay.biases) != len(lay.weights):
            raise ValueError(f"layer {idx}: bias length {len(lay.biases)} != rows {len(lay.weights)}")
        if idx > 1 and lay.in_dim != net.layers[idx - 2].out_dim:
            raise ValueError(
                f"layer {idx}: expects input width {lay.in_dim}, "
                f"previous layer outputs {net.layers[idx - 2].out_dim}"
            )
        for row in lay.weights:
            for value in row:
                if not _entry_ok(value, net.scalar_mode):
                    raise ValueError(f"layer {idx}: entry {value!r} not valid for {net.scalar_mode}")
        for value in lay.biases:
            if not _entry_ok(value, net.scalar_mode):
                raise ValueError(f"layer {idx}: bias {value!r} not valid for {net.scalar_mode}")
    if net.layers[-1].out_dim != 1:
        raise ValueError(f"layer {len(net.layers)}: output width must be 1, got {net.layers[-1].out_dim}")
    return net.dims


def _eval_exact(net: ReluNetwork, x: Sequence) -> Fraction:
    values = [as_ratio(v) for v in x]
    last = len(net.layers) - 1
    zero = Fraction(0)
    for idx, lay in enumerate(net.layers):
        new_values = []
        for row, b in zip(lay.weights, lay.biases):
            # Hand-built nets are sparse; skipping zero terms keeps the
            # rational arithmetic proportional to the nonzero structure.
            acc = b
            for w, v in zip(row, values):
                if w and v:
                    acc = acc + w * v
            new_values.append(acc)
        if idx != last:
            values = [v if v > 0 else zero for v in new_values]
        else:
            values = new_values
    return values[0]


def _float_arrays(net: ReluNetwork):
    return [
        (np.asarray(lay.weights, dtype=np.float64), np.asarray(lay.biases, dtype=np.float64))
        for lay in net.layers
    ]


def eval_network(net: ReluNetwork, x: Sequence) -> Scalar:
    """Forward pass; returns the single output scalar.

    Exact mode accepts ints/Fractions and returns a Fraction; float64 mode
    accepts anything float()-able and returns a float.
    """
    if len(x) != net.dims[0]:
        raise ValueError(f"input length {len(x)} != network input width {net.dims[0]}")
    if net.scalar_mode == EXACT_MODE:
        return _eval_exact(net, x)
    return float(eval_network_batch(net, np.asarray([list(map(float, x))]))[0])


def eval_network_batch(net: ReluNetwork, points: np.ndarray) -> np.ndarray:
    """Vectorized forward pass for float64 networks; points has shape (n, d)."""
    if net.scalar_mode != FLOAT_MODE:
        raise ValueError("batch evaluation is the float64 path; cast with to_float64 first")
    h = np.asarray(points, dtype=np.float64)
    arrays = _float_arrays(net)
    for idx, (w, b) in enumerate(arrays):
        h = h @ w.T + b
        if idx != len(arrays) - 1:
            h = np.maximum(h, 0.0)
    return h[:, 0]


def to_float64(net: ReluNetwork) -> ReluNetwork:
    return make_network(
        [
            make_layer(
                [[float(v) for v in row] for row in lay.weights],
                [float(v) for v in lay.biases],
            )
            for lay in net.layers
        ],
        scalar_mode=FLOAT_MODE,
    )


def to_exact(net: ReluNetwork) -> ReluNetwork:
    """Exact copy of a float64 network (each float becomes its exact binary
    rational), enabling exact line-collapse on trained nets."""
    if net.scalar_mode == EXACT_MODE:
        return net
    return make_network(
        [
            make_layer(
                [[Fraction(v) for v in row] for row in lay.weights],
                [Fraction(v) for v in lay.biases],
            )
            for lay in net.layers
        ],
        scalar_mode=EXACT_MODE,
    )


def _format_entry(value, mode: str) -> str:
    if mode == EXACT_MODE:
        return format_ratio(as_ratio(value))
    return repr(float(value))


def _parse_entry(text: str, mode: str):
    if mode == EXACT_MODE:
        return parse_ratio(text)
    return float(text)


def network_to_json(net: ReluNetwork) -> dict:
    validate_network(net)
    return {
        "dims": list(net.dims),
        "scalar_mode": net.scalar_mode,
        "layers": [
            {
                "A": [[_format_entry(v, net.scalar_mode) for v in row] for row in lay.weights],
                "b": [_format_entry(v, net.scalar_mode) for v in lay.biases],
            }
            for lay in net.layers
        ],
    }


def network_from_json(doc: dict) -> ReluNetwork:
    mode = doc["scalar_mode"]
    layers = [
        make_layer(
            [[_parse_entry(v, mode) for v in row] for row in entry["A"]],
            [_parse_entry(v, mode) for v in entry["b"]],
        )
        for entry in doc["layers"]
    ]
    net = make_network(layers, scalar_mode=mode)
    if list(net.dims) != list(doc["dims"]):
        raise ValueError(f"declared dims {doc['dims']} do not match layers {list(net.dims)}")
    return net


def save_network(net: ReluNetwork, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(network_to_json(net), fh, indent=1)
        fh.write("\n")


def load_network(path) -> ReluNetwork:
    with open(path, "r", encoding="utf-8") as fh:
        return network_from_json(json.load(fh))
