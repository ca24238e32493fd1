"""Oracle protocol and adversary for the non-computability demonstration.

A solver never sees input coordinates; it may only request dyadic
approximations (coordinate j of training point k to precision 2^-n). The
adversary always serves the rounded coordinates of the delta = 0 instance.
Those answers are simultaneously valid for every instance with delta = 4^-m
once 4^-m <= 2^-n, so after the solver halts at maximum precision 2^-K the
adversary picks such a delta and measures the output against both
instances' solution sets. One of the two distances is provably large: the
delta = 0 instance forces every near-minimiser to sit >= 1/2 away from the
labels somewhere, while the positive-delta instance forces outputs within
eps_hat of the labels everywhere.

Transcripts are plain ordered text ("Q j k n -> value"), stable across runs
for fixed seeds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

from .problem import (
    COST_KINDS,
    LabeledMultiset,
    ProblemInstance,
    cf_eps_bound,
    classify,
    grid_point,
    separation_radius,
)
from .ratio import as_ratio, format_ratio

HALF = Fraction(1, 2)
DEFAULT_QUERY_BUDGET = 10**6


class ProtocolError(Exception):
    """Solver sent an out-of-range or malformed request."""


class QueryBudgetExceeded(Exception):
    """Raised into the solver once its query allowance is spent."""


@dataclass(frozen=True)
class DyadicQuery:
    j: int  # coordinate, 1..d
    k: int  # training point, 1..r
    n: int  # precision level, answer on the grid of multiples of 2^-n


@dataclass(frozen=True)
class DyadicAnswer:
    value: Fraction  # an integer multiple of 2^-n
    n: int


@dataclass(frozen=True)
class OracleTranscript:
    queries: tuple  # ordered (DyadicQuery, DyadicAnswer) pairs
    max_precision: int
    halted: bool
    output: Optional[tuple]  # floats of length r when halted, None otherwise

    def __post_init__(self):
        if self.halted != (self.output is not None):
            raise ValueError("output must be present exactly when the solver halted")


@dataclass(frozen=True)
class Verdict:
    chosen_instance: Fraction  # the delta the solver is judged against
    distance_lower_bound: Fraction  # inf (as math.inf) for NH
    norm: str
    threshold: Fraction
    status: str  # failed-instance | non-halting | disqualified
    details: dict = field(default_factory=dict)


class AdversarySession:
    """Serves dyadic approximations of the delta = 0 instance.

    Rounding is half-up on the 2^-n grid, so every answer is within
    2^-(n+1) of the delta = 0 coordinate and within 2^-n of any instance
    whose delta is at most 2^-n.
    """

    def __init__(self, a, kappa, r: int, d: int, query_budget: int = DEFAULT_QUERY_BUDGET):
        self.inst0 = ProblemInstance(a=as_ratio(a), kappa=as_ratio(kappa), delta=Fraction(0), d=d)
        self.r = int(r)
        self.query_budget = int(query_budget)
        self.queries = []
        self.max_precision = 0
        self.exhausted = False

    def _coordinate(self, j: int, k: int, delta: Fraction) -> Fraction:
        if j == 1:
            return self.inst0.a / (k + 1 - self.inst0.kappa)
        if j == 2 and k % 2 == 0:
            return delta
        return Fraction(0)

    def ask(self, j: int, k: int, n: int) -> Fraction:
        if not (isinstance(j, int) and isinstance(k, int) and isinstance(n, int)):
            raise ProtocolError(f"indices must be integers, got ({j!r}, {k!r}, {n!r})")
        if not 1 <= j <= self.inst0.d:
            raise ProtocolError(f"coordinate index {j} outside 1..{self.inst0.d}")
        if not 1 <= k <= self.r:
            raise ProtocolError(f"point index {k} outside 1..{self.r}")
        if n < 1:
            raise ProtocolError(f"precision level must be >= 1, got {n}")
        if len(self.queries) >= self.query_budget:
            self.exhausted = True
            raise QueryBudgetExceeded(f"query budget {self.query_budget} spent")
        true = self._coordinate(j, k, Fraction(0))
        scale = 2**n
        value = Fraction(math.floor(true * scale + HALF), scale)
        query = DyadicQuery(j=j, k=k, n=n)
        answer = DyadicAnswer(value=value, n=n)
        self.queries.append((query, answer))
        self.max_precision = max(self.max_precision, n)
        return value

    def serve(self, query: DyadicQuery) -> DyadicAnswer:
        value = self.ask(query.j, query.k, query.n)
        return DyadicAnswer(value=value, n=query.n)


def adversary_serve(query: DyadicQuery, state: AdversarySession) -> DyadicAnswer:
    return state.serve(query)


def _width_product(dims: Sequence[int]) -> int:
    prod = 1
    for n in dims[1:-1]:
        prod *= n + 1
    return prod


def solution_set_gap(r: int, dims: Sequence[int], eps_hat) -> Fraction:
    """The certified l-infinity separation 1/2 - eps_hat between the two
    instances' near-minimiser output sets. Needs r >= 3 * prod(N_l + 1) so
    the line-collapse counting applies to the delta = 0 instance."""
    eps_hat = as_ratio(eps_hat)
    prod = _width_product(tuple(dims))
    if r < 3 * prod:
        raise ValueError(f"need r >= {3 * prod} points for the counting argument, got {r}")
    if not 0 < eps_hat < HALF:
        raise ValueError(f"eps_hat must lie in (0, 1/2), got {eps_hat}")
    return HALF - eps_hat


def _choose_delta(r: int, max_precision: int) -> tuple:
    """Smallest admissible 4^-m: consistent with every served precision
    (4^-m <= 2^-K) and inside the instance family (4^-m < eps'(r))."""
    eps_prime = separation_radius(r)
    m = max(1, math.ceil(max_precision / 2))
    while not Fraction(1, 4**m) < eps_prime:
        m += 1
    return m, Fraction(1, 4**m)


def run_adversary(
    solver: Callable,
    *,
    a,
    kappa,
    r: int,
    dims: Sequence[int],
    cost: str,
    eps,
    norm: str = "linf",
    query_budget: int = DEFAULT_QUERY_BUDGET,
) -> tuple:
    """Run one solver against the adversary; returns (Verdict, OracleTranscript).

    The solver is called as solver(ask, r, d) with ask(j, k, n) -> Fraction
    and must return a length-r real vector, or None to concede (recorded as
    non-halting, like exceeding the query budget). After the run every served
    answer is replayed against both final instances and checked exactly.
    """
    if cost not in COST_KINDS:
        raise ValueError(f"unknown cost kind {cost!r}")
    if norm not in ("l1", "l2", "linf"):
        raise ValueError(f"unknown norm {norm!r}")
    dims = tuple(int(n) for n in dims)
    eps_hat = cf_eps_bound(cost, r, as_ratio(eps))
    eps_hat = eps_hat if isinstance(eps_hat, Fraction) else Fraction(float(eps_hat))
    if not 0 < eps_hat < HALF:
        raise ValueError(f"eps and cost give eps_hat = {eps_hat}, outside (0, 1/2)")
    gap = solution_set_gap(r, dims, eps_hat)
    threshold = Fraction(1, 4) - 3 * eps_hat / 4
    proposition_bound = Fraction(1, 4) - eps_hat / 2

    session = AdversarySession(a, kappa, r, dims[0], query_budget)
    output = None
    status = "failed-instance"
    try:
        output = solver(session.ask, r, dims[0])
    except QueryBudgetExceeded:
        output = None
    except ProtocolError:
        status = "disqualified"

    if session.exhausted:
        output = None
    if output is not None:
        try:
            output = tuple(float(x) for x in output)
            if len(output) != r or not all(math.isfinite(x) for x in output):
                raise ValueError
        except (TypeError, ValueError):
            status = "disqualified"
            output = None

    m, delta1 = _choose_delta(r, session.max_precision)
    transcript = OracleTranscript(
        queries=tuple(session.queries),
        max_precision=session.max_precision,
        halted=output is not None,
        output=output,
    )

    # replay: every answer must be consistent with both final instances
    for query, answer in transcript.queries:
        tol = Fraction(1, 2**query.n)
        for delta in (Fraction(0), delta1):
            true = session._coordinate(query.j, query.k, delta)
            if not abs(answer.value - true) <= tol:
                raise AssertionError(
                    f"served answer {answer.value} for (j={query.j}, k={query.k}, "
                    f"n={query.n}) is inconsistent with delta={delta}"
                )

    details = {
        "eps_hat": eps_hat,
        "gap": gap,
        "proposition_bound": proposition_bound,
        "m": m,
        "max_precision": session.max_precision,
        "query_count": len(transcript.queries),
    }
    if status == "disqualified":
        verdict = Verdict(Fraction(0), math.inf, norm, threshold, "disqualified", details)
        return verdict, transcript
    if output is None:
        verdict = Verdict(Fraction(0), math.inf, norm, threshold, "non-halting", details)
        return verdict, transcript

    labels = [classify(session.inst0, grid_point(session.inst0, k)) for k in range(1, r + 1)]
    exact_output = [Fraction(x) for x in output]
    t = max(abs(v - y) for v, y in zip(exact_output, labels))
    d0 = max(Fraction(0), HALF - t)  # distance to the delta=0 near-minimisers
    d1 = max(Fraction(0), t - eps_hat)  # distance to the delta=4^-m near-minimisers
    bound = max(d0, d1)
    chosen = Fraction(0) if d0 >= d1 else delta1
    if not bound >= threshold:
        raise AssertionError(f"distance bound {bound} fell below the threshold {threshold}")
    details.update({"t": t, "d0": d0, "d1": d1})
    verdict = Verdict(chosen, bound, norm, threshold, "failed-instance", details)
    return verdict, transcript


# ---------------------------------------------------------------------------
# transcripts as text


def _format_real(x) -> str:
    if isinstance(x, Fraction):
        return format_ratio(x)
    if x == math.inf:
        return "inf"
    return repr(float(x))


def transcript_text(transcript: OracleTranscript, verdict: Verdict) -> str:
    lines = []
    for query, answer in transcript.queries:
        lines.append(f"Q {query.j} {query.k} {query.n} -> {format_ratio(answer.value)}")
    lines.append(f"halted: {'yes' if transcript.halted else 'no'}")
    if transcript.halted:
        lines.append("output: " + " ".join(repr(x) for x in transcript.output))
    else:
        lines.append("output: NH")
    lines.append("verdict:")
    lines.append(f"  status: {verdict.status}")
    lines.append(f"  instance: delta={_format_real(verdict.chosen_instance)}")
    lines.append(f"  norm: {verdict.norm}")
    for key in ("t", "d0", "d1"):
        if key in verdict.details:
            lines.append(f"  {key}: {_format_real(verdict.details[key])}")
    lines.append(f"  distance lower bound: {_format_real(verdict.distance_lower_bound)}")
    lines.append(f"  threshold: {_format_real(verdict.threshold)}")
    lines.append(f"  proposition bound: {_format_real(verdict.details['proposition_bound'])}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# baseline solvers


def labels_solver() -> Callable:
    """Outputs the (delta-independent) labels without asking anything."""

    def solve(ask, r, d):
        del ask, d
        return [(k + 1) % 2 for k in range(1, r + 1)]

    return solve


def hedge_solver() -> Callable:
    """Outputs 1/2 everywhere after a token precision probe."""

    def solve(ask, r, d):
        ask(1, 1, 1)
        return [0.5] * r

    return solve


def train_solver(seed: int, precision: int = 12, epochs: int = 300) -> Callable:
    """Queries every coordinate at fixed precision, trains a small network
    on the reconstructed points against the known labels, and answers the
    network's values there."""

    def solve(ask, r, d):
        from .network import eval_network_batch
        from .training import TrainConfig, train

        points = []
        for k in range(1, r + 1):
            points.append(tuple(ask(j, k, precision) for j in range(1, d + 1)))
        labels = tuple((k + 1) % 2 for k in range(1, r + 1))
        data = LabeledMultiset(points=tuple(points), labels=labels, provenance=f"queried(n={precision})")
        cfg = TrainConfig(
            cost="mean_square",
            learning_rate=0.3,
            epochs=epochs,
            init_scale=0.5,
            seed=seed,
            g="identity",
        )
        outcome = train((d, 4, 1), data, data, cfg)
        X = [[float(c) for c in p] for p in points]
        return [float(v) for v in eval_network_batch(outcome.net, X)]

    return solve


def nonhalting_solver() -> Callable:
    """Asks the same question forever; the budget converts this to NH."""

    def solve(ask, r, d):
        del d
        while True:
            ask(1, 1, 1)

    return solve


def baseline_solvers(seed: int) -> dict:
    """The battery used by tests and the command line."""
    return {
        "labels": labels_solver(),
        "hedge": hedge_solver(),
        "train": train_solver(seed),
    }
