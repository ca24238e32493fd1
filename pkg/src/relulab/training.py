"""Gradient-descent training and the restricted perturbation search.

The trainer is deliberately plain: full-batch gradient descent with constant
learning rate on one of the catalogue costs, uniform initialization, analytic
relu subgradients (0 at the kink), best-cost iterate returned. The claims
exercised downstream hold for any approximate minimiser, so nothing fancier
is warranted.

The attack search is restricted to the two hand-construction families
(second coordinate dropped by delta or left alone, first coordinate shifted
by omega >= 0 on a grid), with the true label recomputed at the perturbed
point.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

from .monotone import MonotoneMap, parse_monotone
from .network import (
    FLOAT_MODE,
    ReluNetwork,
    eval_network,
    eval_network_batch,
    make_layer,
    make_network,
)
from .problem import (
    COST_KINDS,
    CROSS_ENTROPY,
    MEAN_ABSOLUTE,
    MEAN_SQUARE,
    ROOT_MEAN_SQUARE,
    LabeledMultiset,
    ProblemInstance,
    classify,
    trial_rng,
)
from .constructions import Perturbation, make_perturbation
from .ratio import as_ratio

OMEGA_GRID = 1000
NORM_KINDS = ("l1", "l2", "linf")


def as_monotone(g: Union[str, MonotoneMap]) -> MonotoneMap:
    return parse_monotone(g) if isinstance(g, str) else g


@dataclass(frozen=True)
class TrainConfig:
    cost: str
    learning_rate: float
    epochs: int
    init_scale: float
    seed: int
    g: str = "logistic"

    def __post_init__(self):
        if self.cost not in COST_KINDS:
            raise ValueError(f"unknown cost kind {self.cost!r}")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        parse_monotone(self.g)


@dataclass(frozen=True)
class TrainOutcome:
    net: ReluNetwork
    final_cost: float
    train_accuracy: float
    val_accuracy: float
    history: tuple
    diverged: bool


# ---------------------------------------------------------------------------
# parameter-space plumbing (shared with the gradient tests)


def init_params(dims: Sequence[int], init_scale: float, seed: int) -> list:
    rng = trial_rng(seed, 0)
    params = []
    for i in range(1, len(dims)):
        W = rng.uniform(-init_scale, init_scale, size=(dims[i], dims[i - 1]))
        b = rng.uniform(-init_scale, init_scale, size=dims[i])
        params.append((W, b))
    return params


def params_to_network(params) -> ReluNetwork:
    layers = [make_layer([list(map(float, row)) for row in W], list(map(float, b))) for W, b in params]
    return make_network(layers, FLOAT_MODE)


def network_to_params(net: ReluNetwork) -> list:
    if net.scalar_mode != FLOAT_MODE:
        raise ValueError("parameter extraction expects a float64 network")
    return [
        (np.array(layer.weights, dtype=np.float64), np.array(layer.biases, dtype=np.float64))
        for layer in net.layers
    ]


def _forward(params, X):
    """Returns (preactivations per layer, activations per layer, output)."""
    pres = []
    acts = [X]
    h = X
    for i, (W, b) in enumerate(params):
        pre = h @ W.T + b
        pres.append(pre)
        if i < len(params) - 1:
            h = np.maximum(pre, 0.0)
            acts.append(h)
    return pres, acts, pres[-1][:, 0]


def _cost_and_output_grad(kind: str, g: MonotoneMap, z, w):
    """Cost of g(z) against w and its gradient in z. Cross-entropy with the
    logistic readout uses the fused form (v - w)/r, which stays finite where
    the factored chain rule would hit 0/0."""
    r = len(z)
    v = g.apply_batch(z)
    diff = v - w
    if kind == CROSS_ENTROPY:
        if g.kind == "logistic":
            eps_free = np.logaddexp(0.0, -z)  # -log v without underflow
            cost = float(np.sum(w * eps_free + (1.0 - w) * (z + eps_free))) / r
            return cost, diff / r
        if np.any(v <= 0.0) or np.any(v >= 1.0):
            return math.inf, np.zeros_like(z)
        cost = -float(np.sum(w * np.log(v) + (1.0 - w) * np.log(1.0 - v))) / r
        dv = (-w / v + (1.0 - w) / (1.0 - v)) / r
        return cost, dv * g.deriv_batch(z)
    if kind == MEAN_SQUARE:
        return float(np.sum(diff**2)) / r, (2.0 / r) * diff * g.deriv_batch(z)
    if kind == ROOT_MEAN_SQUARE:
        l2 = math.sqrt(float(np.sum(diff**2)))
        if l2 == 0.0:
            return 0.0, np.zeros_like(z)
        return l2 / r, diff / (r * l2) * g.deriv_batch(z)
    if kind == MEAN_ABSOLUTE:
        return float(np.sum(np.abs(diff))) / r, np.sign(diff) / r * g.deriv_batch(z)
    raise ValueError(f"unknown cost kind {kind!r}")


def cost_value(params, X, y, kind: str, g: Union[str, MonotoneMap]) -> float:
    _, _, z = _forward(params, X)
    cost, _ = _cost_and_output_grad(kind, as_monotone(g), z, y)
    return cost


def cost_gradients(params, X, y, kind: str, g: Union[str, MonotoneMap]):
    """(cost, [(dW, db), ...]) by backpropagation; relu subgradient 0 at 0."""
    g = as_monotone(g)
    pres, acts, z = _forward(params, X)
    cost, dz = _cost_and_output_grad(kind, g, z, y)
    grads = [None] * len(params)
    delta = dz[:, None]
    for i in range(len(params) - 1, -1, -1):
        W, _ = params[i]
        grads[i] = (delta.T @ acts[i], delta.sum(axis=0))
        if i > 0:
            delta = (delta @ W) * (pres[i - 1] > 0.0)
    return cost, grads


def _dataset_arrays(S: LabeledMultiset):
    X = np.array([[float(c) for c in p] for p in S.points], dtype=np.float64)
    y = np.array(S.labels, dtype=np.float64)
    return X, y


def train(dims: Sequence[int], data: LabeledMultiset, val: LabeledMultiset, cfg: TrainConfig) -> TrainOutcome:
    """Full-batch gradient descent; deterministic in cfg; returns the
    best-cost iterate seen. Divergence (nan/inf cost) stops the descent and
    is flagged, with the remaining history entries set to inf."""
    dims = tuple(int(n) for n in dims)
    if len(data) == 0:
        raise ValueError("training data must be nonempty")
    if len(data.points[0]) != dims[0]:
        raise ValueError(f"data has {len(data.points[0])} coordinates, dims expect {dims[0]}")
    if dims[-1] != 1:
        raise ValueError("trainer builds single-output networks")
    g = as_monotone(cfg.g)
    if not g.is_differentiable:
        raise ValueError(f"readout {g.spec_string()!r} is not trainable")

    X, y = _dataset_arrays(data)
    params = init_params(dims, cfg.init_scale, cfg.seed)
    best_cost = math.inf
    best_params = [(W.copy(), b.copy()) for W, b in params]
    history = [math.inf] * cfg.epochs
    diverged = False
    for epoch in range(cfg.epochs):
        cost, grads = cost_gradients(params, X, y, cfg.cost, g)
        history[epoch] = cost
        if not math.isfinite(cost):
            diverged = True
            break
        if cost < best_cost:
            best_cost = cost
            best_params = [(W.copy(), b.copy()) for W, b in params]
        params = [
            (W - cfg.learning_rate * dW, b - cfg.learning_rate * db)
            for (W, b), (dW, db) in zip(params, grads)
        ]

    net = params_to_network(best_params)
    return TrainOutcome(
        net=net,
        final_cost=best_cost,
        train_accuracy=accuracy(net, g, data),
        val_accuracy=accuracy(net, g, val),
        history=tuple(history),
        diverged=diverged,
    )


def accuracy(net: ReluNetwork, g: Union[str, MonotoneMap], S: LabeledMultiset, threshold=Fraction(1, 2)) -> float:
    """Fraction of points with |g(net(x)) - label| < threshold. The empty
    set counts as perfectly classified, with a warning."""
    g = as_monotone(g)
    if len(S) == 0:
        warnings.warn("accuracy of an empty set is vacuously 1.0", RuntimeWarning)
        return 1.0
    if net.scalar_mode == FLOAT_MODE:
        X, y = _dataset_arrays(S)
        errors = np.abs(g.apply_batch(eval_network_batch(net, X)) - y)
        return float(np.mean(errors < float(threshold)))
    correct = 0
    for pt, label in zip(S.points, S.labels):
        value = g(eval_network(net, pt))
        if abs(value - label) < threshold:
            correct += 1
    return correct / len(S)


# ---------------------------------------------------------------------------
# restricted perturbation search


@dataclass(frozen=True)
class AttackSearchOutcome:
    perturbation: Perturbation
    flips: int
    flipped_indices: tuple
    norm_kind: str
    norm_value: float
    omega: Fraction

    @property
    def family(self) -> str:
        return self.perturbation.target_parity


def _norm_value(entries, kind: str) -> float:
    if kind == "l1":
        return float(sum(abs(e) for e in entries))
    if kind == "l2":
        return math.sqrt(float(sum(e * e for e in entries)))
    return float(max(abs(e) for e in entries))


def universal_attack_search(
    net: ReluNetwork,
    g: Union[str, MonotoneMap],
    S: LabeledMultiset,
    inst: ProblemInstance,
    eps_budget,
    norm: str = "linf",
) -> AttackSearchOutcome:
    """Best single perturbation from the two construction families, omega on
    a 1000-point grid in [0, eps_budget). A point counts as flipped when
    |g(net(x + eta)) - f(x + eta)| >= 1/2, the label taken at the perturbed
    point. Ties prefer the smaller perturbation, then the even-target family.
    """
    if norm not in NORM_KINDS:
        raise ValueError(f"norm must be one of {NORM_KINDS}, got {norm!r}")
    eps_budget = as_ratio(eps_budget)
    if not eps_budget > 0:
        raise ValueError("eps_budget must be > 0")
    g = as_monotone(g)
    X, _ = _dataset_arrays(S)

    best = None
    for parity in ("even", "odd"):
        for i in range(OMEGA_GRID):
            omega = eps_budget * i / OMEGA_GRID
            pert = make_perturbation(inst, omega, parity)
            moved = [tuple(c + e for c, e in zip(pt, pert.entries)) for pt in S.points]
            labels = np.array([classify(inst, p) for p in moved], dtype=np.float64)
            eta = np.array([float(e) for e in pert.entries])
            if net.scalar_mode == FLOAT_MODE:
                values = g.apply_batch(eval_network_batch(net, X + eta))
            else:
                values = np.array([float(g(eval_network(net, p))) for p in moved])
            flipped = np.abs(values - labels) >= 0.5
            count = int(flipped.sum())
            nv = _norm_value(pert.entries, norm)
            if best is None or count > best.flips or (count == best.flips and nv < best.norm_value):
                best = AttackSearchOutcome(
                    perturbation=pert,
                    flips=count,
                    flipped_indices=tuple(int(j) for j in np.flatnonzero(flipped)),
                    norm_kind=norm,
                    norm_value=nv,
                    omega=omega,
                )
    return best


def greedy_alternating(zs: Sequence[int]) -> list:
    """Positions of the greedy parity-alternating subsequence of a sorted
    index sequence; its length is 1 + (number of odd gaps)."""
    if not len(zs):
        return []
    keep = [0]
    for i in range(1, len(zs)):
        if (zs[i] - zs[keep[-1]]) % 2 == 1:
            keep.append(i)
    return keep


# ---------------------------------------------------------------------------
# CSV artifacts


def training_curve_csv(outcome: TrainOutcome) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["epoch", "cost"])
    for epoch, cost in enumerate(outcome.history):
        writer.writerow([epoch, repr(cost)])
    return buf.getvalue()


def attack_outcomes_csv(outcomes, labels: Optional[Sequence[str]] = None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["run", "family", "omega", "norm", "norm value", "flips", "flipped indices"])
    for i, oc in enumerate(outcomes):
        writer.writerow(
            [
                labels[i] if labels else str(i),
                oc.family,
                f"{oc.omega.numerator}/{oc.omega.denominator}",
                oc.norm_kind,
                repr(oc.norm_value),
                oc.flips,
                ";".join(str(j) for j in oc.flipped_indices),
            ]
        )
    return buf.getvalue()
