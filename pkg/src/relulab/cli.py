"""Configuration-driven command line tying the modules into experiments.

One command per invocation. A TOML config supplies the command and its
parameters; every flag mirrors a config key and overrides it. Artifacts are
CSV and structured text as defined by each module, plus a manifest echoing
the effective configuration (the manifest is the only timestamped file, so
reruns with the same config and seed are otherwise byte-identical).

Exit codes: 0 all asserted invariants passed; 1 an invariant failed (named
on stderr); 2 the config violated the schema.
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from . import __version__
from .constructions import (
    build_stable_classifier,
    build_unstable_matcher,
    certified_intervals,
    make_perturbation,
    stable_alphas,
    verify_attack,
)
from .montecarlo import (
    reports_to_csv,
    summary_to_json,
    verify_alternation_bound,
    verify_max_bound,
    verify_theorem_event,
    verify_unique_count,
)
from .network import eval_network, network_to_json
from .oracle import baseline_solvers, run_adversary, transcript_text
from .problem import (
    COST_KINDS,
    ProblemInstance,
    classify,
    enumerate_dataset,
    sample_dataset,
    separation_radius,
    is_well_separated,
)
from .ratio import format_ratio, parse_ratio
from .reduction import collapse_on_line, collapse_trace_text, extract_misclassified
from .monotone import parse_monotone
from .training import (
    TrainConfig,
    attack_outcomes_csv,
    train,
    training_curve_csv,
    universal_attack_search,
)

THREADS_ENV = "RELULAB_THREADS"
COMMANDS = ("construct", "attack", "train", "montecarlo", "adversary", "full-report")

# published parameter schema: command -> {key: (caster, default or REQUIRED)}
_REQUIRED = object()


def _ratio(x):
    return parse_ratio(x) if isinstance(x, str) else Fraction(x)


def _intlist(x):
    return tuple(int(v) for v in x)


CONFIG_SCHEMA = {
    "construct": {
        "a": (_ratio, Fraction(1, 2)),
        "kappa": (_ratio, Fraction(1, 2)),
        "delta": (_ratio, Fraction(1, 100)),
        "K": (int, 50),
        "dims": (_intlist, (2, 3, 1)),
    },
    "attack": {
        "a": (_ratio, Fraction(1, 2)),
        "kappa": (_ratio, Fraction(1, 2)),
        "delta": (_ratio, Fraction(1, 100)),
        "K": (int, 50),
        "dims": (_intlist, (2, 3, 1)),
        "omega": (_ratio, Fraction(0)),
        "parity": (str, "even"),
    },
    "train": {
        "a": (_ratio, Fraction(1, 2)),
        "kappa": (_ratio, Fraction(1, 2)),
        "delta": (_ratio, Fraction(1, 20)),
        "gamma": (float, 1.5),
        "r": (int, 50),
        "s": (int, 50),
        "dims": (_intlist, (2, 8, 1)),
        "cost": (str, "cross_entropy"),
        "g": (str, "logistic"),
        "learning_rate": (float, 0.5),
        "epochs": (int, 3000),
        "init_scale": (float, 0.5),
        "budget_over_delta": (float, 1.2),
        "norm": (str, "linf"),
    },
    "montecarlo": {
        "operation": (str, "preset"),
        "gamma": (float, 1.5),
        "theta": (int, 100),
        "n": (int, 10**6),
        "n_min": (int, 100),
        "trials": (int, 1000),
        "r": (int, 200),
        "s": (int, 200),
        "p": (float, 0.5),
        "q": (int, 1),
        "width_product": (int, 2),
        "surrogate_C": (float, 0.0),  # 0 means "use the derived constant"
        "a": (_ratio, Fraction(1, 2)),
        "kappa": (_ratio, Fraction(1, 2)),
        "delta": (_ratio, Fraction(1, 100)),
    },
    "adversary": {
        "a": (_ratio, Fraction(1, 2)),
        "kappa": (_ratio, Fraction(1, 2)),
        "r": (int, 6),
        "dims": (_intlist, (2, 1, 1)),
        "cost": (str, "mean_square"),
        "eps": (_ratio, Fraction(1, 96)),
        "norm": (str, "linf"),
        "solver": (str, "labels"),
    },
    "full-report": {
        "seeds": (int, 3),
        "epochs": (int, 1500),
    },
}

PRESETS = {
    "probability-bounds": (
        "montecarlo",
        {"operation": "preset"},
    ),
    "matcher-demo": ("construct", {}),
    "attack-demo": ("attack", {}),
    "adversary-battery": ("adversary", {"solver": "all"}),
}


class SchemaError(Exception):
    pass


@dataclass
class ExperimentConfig:
    command: str
    params: dict
    seed: int = 0
    out_dir: str = ""
    threads: int = 1
    artifacts: dict = field(default_factory=dict)  # name -> bytes (filled by run)


def validate_config(command: str, raw_params: dict, seed, out_dir, threads) -> ExperimentConfig:
    if command not in COMMANDS:
        raise SchemaError(f"unknown command {command!r}; expected one of {', '.join(COMMANDS)}")
    schema = CONFIG_SCHEMA[command]
    unknown = set(raw_params) - set(schema)
    if unknown:
        raise SchemaError(
            f"unknown parameter(s) {sorted(unknown)} for command {command!r}; "
            f"allowed: {sorted(schema)}"
        )
    params = {}
    for key, (caster, default) in schema.items():
        if key in raw_params:
            try:
                params[key] = caster(raw_params[key])
            except (TypeError, ValueError, ZeroDivisionError) as exc:
                raise SchemaError(f"parameter {key!r}: cannot interpret {raw_params[key]!r} ({exc})")
        elif default is _REQUIRED:
            raise SchemaError(f"missing required parameter {key!r} for command {command!r}")
        else:
            params[key] = default
    if command == "adversary" and params["cost"] not in COST_KINDS:
        raise SchemaError(f"unknown cost kind {params['cost']!r}")
    try:
        seed = int(seed)
        threads = int(threads)
    except (TypeError, ValueError):
        raise SchemaError("seed and threads must be integers")
    out_dir = str(out_dir) if out_dir else f"runs/{command}"
    return ExperimentConfig(command=command, params=params, seed=seed, out_dir=out_dir, threads=threads)


# ---------------------------------------------------------------------------
# pipelines (each returns {filename: text}; exit-relevant asserts raise)


def _pipeline_construct(cfg: ExperimentConfig) -> dict:
    p = cfg.params
    inst = ProblemInstance(a=p["a"], kappa=p["kappa"], delta=p["delta"], d=p["dims"][0])
    matcher = build_unstable_matcher(inst, p["dims"])
    eps_rad = separation_radius(p["K"]) / 2
    alphas = stable_alphas(inst, p["K"], eps_rad)
    stable = build_stable_classifier(alphas, inst.d)
    ds = enumerate_dataset(inst, p["K"])
    ok, witness = is_well_separated(inst, ds, separation_radius(p["K"]))
    if not ok:
        raise AssertionError(f"separation certificate failed: {witness}")
    lines = ["k,label,matcher,stable,agree"]
    for i, (pt, label) in enumerate(zip(ds.points, ds.labels)):
        mv = eval_network(matcher, pt)
        sv = eval_network(stable, pt)
        agree = mv == label == sv
        if not agree:
            raise AssertionError(f"exactness failed at grid index {i + 1}: matcher {mv}, stable {sv}, label {label}")
        lines.append(f"{i + 1},{label},{format_ratio(mv)},{format_ratio(sv)},true")
    return {
        "matcher.json": json.dumps(network_to_json(matcher), indent=1) + "\n",
        "stable.json": json.dumps(network_to_json(stable), indent=1) + "\n",
        "exactness.csv": "\n".join(lines) + "\n",
    }


def _pipeline_attack(cfg: ExperimentConfig) -> dict:
    p = cfg.params
    inst = ProblemInstance(a=p["a"], kappa=p["kappa"], delta=p["delta"], d=p["dims"][0])
    matcher = build_unstable_matcher(inst, p["dims"])
    ds = enumerate_dataset(inst, p["K"])
    pert = make_perturbation(inst, p["omega"], p["parity"])
    report = verify_attack(inst, matcher, ds, pert)
    expected = [i for i, pt in enumerate(ds.points) if (i + 1) % 2 == 0]
    if p["parity"] == "even" and p["omega"] == 0 and list(report.flipped_indices) != expected:
        raise AssertionError("universal perturbation failed to flip exactly the even grid points")
    return {"attack.csv": report.to_csv()}


def _pipeline_train(cfg: ExperimentConfig) -> dict:
    p = cfg.params
    inst = ProblemInstance(a=p["a"], kappa=p["kappa"], delta=p["delta"], d=p["dims"][0])
    data = sample_dataset(inst, p["gamma"], p["r"], cfg.seed)
    val = sample_dataset(inst, p["gamma"], p["s"], cfg.seed + 1)
    tc = TrainConfig(
        cost=p["cost"],
        learning_rate=p["learning_rate"],
        epochs=p["epochs"],
        init_scale=p["init_scale"],
        seed=cfg.seed,
        g=p["g"],
    )
    outcome = train(p["dims"], data, val, tc)
    budget = Fraction(p["budget_over_delta"]) * inst.delta
    search = universal_attack_search(outcome.net, p["g"], data, inst, budget, p["norm"])
    summary = {
        "train_accuracy": outcome.train_accuracy,
        "val_accuracy": outcome.val_accuracy,
        "final_cost": outcome.final_cost,
        "diverged": outcome.diverged,
        "attack_flips": search.flips,
        "attack_family": search.family,
        "attack_omega": format_ratio(search.omega),
    }
    return {
        "curve.csv": training_curve_csv(outcome),
        "trained.json": json.dumps(network_to_json(outcome.net), indent=1) + "\n",
        "attack_search.csv": attack_outcomes_csv([search], [f"seed={cfg.seed}"]),
        "summary.json": json.dumps(summary, indent=1) + "\n",
    }


def _montecarlo_preset_reports(seed: int) -> list:
    return [
        verify_unique_count(1.5, 10**5, 100, seed),
        verify_max_bound(1.5, 100, 10**6, 1000, seed + 1),
        verify_alternation_bound(1.5, 10**4, 100, 6000, seed + 2),
    ]


def _pipeline_montecarlo(cfg: ExperimentConfig) -> dict:
    p = cfg.params
    op = p["operation"]
    if op == "preset":
        reports = _montecarlo_preset_reports(cfg.seed)
        if not all(r.verdict == "pass" for r in reports):
            raise AssertionError(
                "probability-bounds preset expected three passing reports, got "
                + ", ".join(f"{r.operation}={r.verdict}" for r in reports)
            )
    elif op == "unique-count":
        reports = [verify_unique_count(p["gamma"], p["theta"], p["trials"], cfg.seed)]
    elif op == "max-bound":
        reports = [verify_max_bound(p["gamma"], p["theta"], p["n"], p["trials"], cfg.seed)]
    elif op == "alternation-bound":
        reports = [verify_alternation_bound(p["gamma"], p["theta"], p["n_min"], p["trials"], cfg.seed)]
    elif op == "theorem-event":
        inst = ProblemInstance(a=p["a"], kappa=p["kappa"], delta=p["delta"], d=2)
        surrogate = p["surrogate_C"] if p["surrogate_C"] > 0 else None
        reports = [
            verify_theorem_event(
                inst,
                p["gamma"],
                p["r"],
                p["s"],
                p["p"],
                p["trials"],
                cfg.seed,
                surrogate_C=surrogate,
                q=p["q"],
                width_product=p["width_product"],
            )
        ]
    else:
        raise SchemaError(
            f"unknown montecarlo operation {op!r}; expected preset, unique-count, "
            f"max-bound, alternation-bound or theorem-event"
        )
    return {"reports.csv": reports_to_csv(reports), "summary.json": summary_to_json(reports)}


def _pipeline_adversary(cfg: ExperimentConfig) -> dict:
    p = cfg.params
    solvers = baseline_solvers(cfg.seed)
    if p["solver"] != "all":
        if p["solver"] not in solvers:
            raise SchemaError(f"unknown solver {p['solver']!r}; expected one of {sorted(solvers)} or 'all'")
        solvers = {p["solver"]: solvers[p["solver"]]}
    artifacts = {}
    for name, solver in sorted(solvers.items()):
        verdict, transcript = run_adversary(
            solver,
            a=p["a"],
            kappa=p["kappa"],
            r=p["r"],
            dims=p["dims"],
            cost=p["cost"],
            eps=p["eps"],
            norm=p["norm"],
        )
        artifacts[f"transcript-{name}.txt"] = transcript_text(transcript, verdict)
    return artifacts


CLAIMS = (
    "separation-certificate",
    "matcher-exactness",
    "universal-perturbation",
    "stable-classifier",
    "line-collapse",
    "misclassified-extraction",
    "distinct-index-count-bound",
    "max-index-bound",
    "alternation-bound",
    "composite-draw-event",
    "trained-net-vulnerability",
    "oracle-adversary-breakdown",
)


def emit_report(results: dict) -> str:
    """One line per claim; claims without artifacts are marked "not run"."""
    width = max(len(c) for c in CLAIMS)
    lines = ["claim".ljust(width) + "  status"]
    for claim in CLAIMS:
        lines.append(claim.ljust(width) + "  " + results.get(claim, "not run"))
    return "\n".join(lines) + "\n"


def _pipeline_full_report(cfg: ExperimentConfig) -> dict:
    p = cfg.params
    results = {}
    artifacts = {}

    inst = ProblemInstance(a=Fraction(1, 2), kappa=Fraction(1, 2), delta=Fraction(1, 100), d=2)
    K = 50
    ds = enumerate_dataset(inst, K)
    ok, _ = is_well_separated(inst, ds, separation_radius(K))
    results["separation-certificate"] = "pass" if ok else "fail"

    matcher = build_unstable_matcher(inst, (2, 3, 1))
    exact = all(eval_network(matcher, pt) == lb for pt, lb in zip(ds.points, ds.labels))
    results["matcher-exactness"] = "pass" if exact else "fail"

    pert = make_perturbation(inst, Fraction(0), "even")
    report = verify_attack(inst, matcher, ds, pert)
    evens = [i for i in range(len(ds.points)) if (i + 1) % 2 == 0]
    results["universal-perturbation"] = "pass" if list(report.flipped_indices) == evens else "fail"
    artifacts["attack.csv"] = report.to_csv()

    eps_rad = separation_radius(K) / 2
    alphas = stable_alphas(inst, K, eps_rad)
    stable = build_stable_classifier(alphas, inst.d)
    stable_ok = all(eval_network(stable, pt) == lb for pt, lb in zip(ds.points, ds.labels))
    for eta in (make_perturbation(inst, eps_rad / 2, "odd"), make_perturbation(inst, -eps_rad / 2, "odd")):
        stable_ok = stable_ok and verify_attack(inst, stable, ds, eta).flipped_count == 0
    results["stable-classifier"] = "pass" if stable_ok else "fail"

    inst0 = ProblemInstance(a=Fraction(1, 2), kappa=Fraction(1, 2), delta=Fraction(0), d=2)
    line = enumerate_dataset(inst0, 24)
    seg = collapse_on_line(matcher, line.points)
    results["line-collapse"] = "pass" if len(seg.indices) * seg.width_product >= 24 else "fail"
    artifacts["collapse.txt"] = collapse_trace_text(seg)

    # the matcher reads only the second coordinate, so it outputs 0 on the
    # whole line and misclassifies every label-1 point there
    ext = extract_misclassified(matcher, parse_monotone("identity"), line.points, list(line.labels))
    results["misclassified-extraction"] = "pass" if len(ext.indices) >= max(1, ext.guarantee) else "fail"

    mc = _montecarlo_preset_reports(cfg.seed)
    results["distinct-index-count-bound"] = mc[0].verdict
    results["max-index-bound"] = mc[1].verdict
    results["alternation-bound"] = mc[2].verdict
    composite = verify_theorem_event(inst, 1.5, 200, 200, 0.5, 1, cfg.seed)
    results["composite-draw-event"] = composite.verdict
    artifacts["montecarlo.csv"] = reports_to_csv(mc + [composite])

    inst_t = ProblemInstance(a=Fraction(1, 2), kappa=Fraction(1, 2), delta=Fraction(1, 20), d=2)
    vulnerable = 0
    accurate = 0
    for s in range(p["seeds"]):
        data = sample_dataset(inst_t, 1.5, 50, cfg.seed + 100 + s)
        val = sample_dataset(inst_t, 1.5, 50, cfg.seed + 200 + s)
        tc = TrainConfig(
            cost="cross_entropy",
            learning_rate=0.5,
            epochs=p["epochs"],
            init_scale=0.5,
            seed=cfg.seed + s,
            g="logistic",
        )
        outcome = train((2, 8, 1), data, val, tc)
        if outcome.train_accuracy == 1.0 and outcome.val_accuracy == 1.0:
            accurate += 1
            search = universal_attack_search(
                outcome.net, "logistic", data, inst_t, Fraction(6, 5) * inst_t.delta, "linf"
            )
            if search.flips >= 1:
                vulnerable += 1
    if accurate == 0:
        results["trained-net-vulnerability"] = "insufficient-data"
    else:
        results["trained-net-vulnerability"] = "pass" if vulnerable == accurate else "fail"

    adv_ok = True
    for name, solver in sorted(baseline_solvers(cfg.seed).items()):
        verdict, transcript = run_adversary(
            solver, a=Fraction(1, 2), kappa=Fraction(1, 2), r=6, dims=(2, 1, 1),
            cost="mean_square", eps=Fraction(1, 96), norm="linf",
        )
        adv_ok = adv_ok and verdict.status == "failed-instance" and verdict.distance_lower_bound >= verdict.threshold
        artifacts[f"transcript-{name}.txt"] = transcript_text(transcript, verdict)
    results["oracle-adversary-breakdown"] = "pass" if adv_ok else "fail"

    artifacts["report.txt"] = emit_report(results)
    return artifacts


PIPELINES = {
    "construct": _pipeline_construct,
    "attack": _pipeline_attack,
    "train": _pipeline_train,
    "montecarlo": _pipeline_montecarlo,
    "adversary": _pipeline_adversary,
    "full-report": _pipeline_full_report,
}


def run(cfg: ExperimentConfig) -> int:
    """Execute the configured pipeline, write artifacts plus manifest."""
    start = time.monotonic()
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        artifacts = PIPELINES[cfg.command](cfg)
    except SchemaError:
        raise
    except (AssertionError, ValueError) as exc:
        print(f"invariant failed: {exc}", file=sys.stderr)
        return 1
    for name, text in artifacts.items():
        (out / name).write_text(text, encoding="utf-8")
    cfg.artifacts = artifacts
    manifest = {
        "command": cfg.command,
        "seed": cfg.seed,
        "threads": cfg.threads,
        "params": {k: (format_ratio(v) if isinstance(v, Fraction) else list(v) if isinstance(v, tuple) else v) for k, v in cfg.params.items()},
        "artifacts": sorted(artifacts),
        "versions": {
            "artifact": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
        "wall_time_s": round(time.monotonic() - start, 3),
        "written_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n", encoding="utf-8")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="relulab",
        description="Exact and statistical experiments on unstable relu classifiers.",
    )
    parser.add_argument("command", nargs="?", choices=COMMANDS, help="pipeline to run (or set in config)")
    parser.add_argument("--config", type=Path, help="TOML experiment file")
    parser.add_argument("--seed", type=int, help="master seed (overrides config)")
    parser.add_argument("--out", help="output directory (overrides config)")
    parser.add_argument("--threads", type=int, help=f"worker count (overrides config and ${THREADS_ENV})")
    parser.add_argument("--preset", choices=sorted(PRESETS), help="named parameter preset")
    args = parser.parse_args(argv)

    doc = {}
    if args.config is not None:
        try:
            with open(args.config, "rb") as fh:
                doc = tomllib.load(fh)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 2

    exp = doc.get("experiment", {})
    params = dict(doc.get("params", {}))
    command = args.command or exp.get("command")
    if args.preset:
        preset_command, preset_params = PRESETS[args.preset]
        command = command or preset_command
        for k, v in preset_params.items():
            params.setdefault(k, v)
    seed = args.seed if args.seed is not None else exp.get("seed", 0)
    out_dir = args.out or exp.get("out_dir", "")
    threads = (
        args.threads
        if args.threads is not None
        else exp.get("threads", os.environ.get(THREADS_ENV, 1))
    )

    try:
        if command is None:
            raise SchemaError("no command given (positional argument or [experiment].command)")
        cfg = validate_config(command, params, seed, out_dir, threads)
    except SchemaError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        return run(cfg)
    except SchemaError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
