import json
from pathlib import Path

import pytest

from relulab.cli import (
    CLAIMS,
    SchemaError,
    emit_report,
    main,
    validate_config,
)


def run_cli(args):
    return main([str(a) for a in args])


def test_construct_writes_artifacts(tmp_path):
    out = tmp_path / "c"
    assert run_cli(["construct", "--out", out, "--seed", "0"]) == 0
    names = {p.name for p in out.iterdir()}
    assert names == {"matcher.json", "stable.json", "exactness.csv", "manifest.json"}
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "construct"
    assert manifest["seed"] == 0
    assert "written_at" in manifest
    lines = (out / "exactness.csv").read_text().strip().split("\n")
    assert lines[0] == "k,label,matcher,stable,agree"
    assert len(lines) == 51  # default K = 50


def test_rerun_is_byte_identical_outside_manifest(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_cli(["attack", "--out", a, "--seed", "3"]) == 0
    assert run_cli(["attack", "--out", b, "--seed", "3"]) == 0
    for name in ("attack.csv",):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_schema_violation_exits_2(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text('[experiment]\ncommand = "attack"\n\n[params]\nbogus = 1\n')
    assert run_cli(["--config", cfg]) == 2
    assert "bogus" in capsys.readouterr().err


def test_unknown_command_exits_2(capsys):
    assert run_cli([]) == 2  # no command anywhere
    err = capsys.readouterr().err
    assert "command" in err


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "exp.toml"
    out1 = tmp_path / "from-file"
    cfg.write_text(
        "[experiment]\n"
        'command = "attack"\n'
        "seed = 5\n"
        f'out_dir = "{out1}"\n'
        "\n[params]\n"
        "K = 6\n"
        'delta = "1/50"\n'
    )
    assert run_cli(["--config", cfg]) == 0
    assert (out1 / "attack.csv").exists()
    manifest = json.loads((out1 / "manifest.json").read_text())
    assert manifest["seed"] == 5
    assert manifest["params"]["K"] == 6
    assert manifest["params"]["delta"] == "1/50"
    # flags override file values
    out2 = tmp_path / "flagged"
    assert run_cli(["--config", cfg, "--out", out2, "--seed", "9"]) == 0
    assert json.loads((out2 / "manifest.json").read_text())["seed"] == 9


def test_threads_env_default(tmp_path, monkeypatch):
    monkeypatch.setenv("RELULAB_THREADS", "4")
    out = tmp_path / "t"
    assert run_cli(["attack", "--out", out]) == 0
    assert json.loads((out / "manifest.json").read_text())["threads"] == 4
    out2 = tmp_path / "t2"
    assert run_cli(["attack", "--out", out2, "--threads", "2"]) == 0
    assert json.loads((out2 / "manifest.json").read_text())["threads"] == 2


def test_validate_config_defaults_and_casting():
    cfg = validate_config("construct", {"a": "3/4", "K": 7}, seed="2", out_dir="", threads=1)
    from fractions import Fraction

    assert cfg.params["a"] == Fraction(3, 4)
    assert cfg.params["K"] == 7
    assert cfg.params["delta"] == Fraction(1, 100)  # schema default
    assert cfg.seed == 2
    assert cfg.out_dir == "runs/construct"
    with pytest.raises(SchemaError):
        validate_config("constructt", {}, 0, "", 1)
    with pytest.raises(SchemaError):
        validate_config("construct", {"K": "seven"}, 0, "", 1)
    with pytest.raises(SchemaError):
        validate_config("adversary", {"cost": "hinge"}, 0, "", 1)


def test_adversary_baseline_failure_is_exit_zero(tmp_path):
    out = tmp_path / "adv"
    assert run_cli(["adversary", "--out", out]) == 0  # default solver: labels
    text = (out / "transcript-labels.txt").read_text()
    assert "status: failed-instance" in text
    assert "distance lower bound: 1/2" in text


def test_emit_report_empty_is_all_not_run():
    text = emit_report({})
    for claim in CLAIMS:
        assert claim in text
    assert text.count("not run") == len(CLAIMS)


def test_emit_report_partial():
    text = emit_report({"matcher-exactness": "pass", "composite-draw-event": "infeasible-at-desk-scale"})
    assert "matcher-exactness" in text and "pass" in text
    assert "infeasible-at-desk-scale" in text
    assert text.count("not run") == len(CLAIMS) - 2


def test_montecarlo_single_operation(tmp_path):
    out = tmp_path / "mc"
    cfg = tmp_path / "mc.toml"
    cfg.write_text(
        "[experiment]\n"
        'command = "montecarlo"\n'
        f'out_dir = "{out}"\n'
        "\n[params]\n"
        'operation = "max-bound"\n'
        "theta = 50\n"
        "n = 10000\n"
        "trials = 60\n"
    )
    assert run_cli(["--config", cfg]) == 0
    csv = (out / "reports.csv").read_text()
    assert csv.splitlines()[0].startswith("operation,")
    summary = json.loads((out / "summary.json").read_text())
    assert summary["reports"][0]["operation"] == "max-bound"


def test_unknown_operation_exits_2(tmp_path, capsys):
    cfg = tmp_path / "odd.toml"
    cfg.write_text(
        "[experiment]\n"
        'command = "montecarlo"\n'
        f'out_dir = "{tmp_path / "bad"}"\n'
        "\n[params]\n"
        'operation = "nope"\n'
    )
    assert run_cli(["--config", cfg]) == 2
    assert "operation" in capsys.readouterr().err


def test_module_rejection_exits_1(tmp_path, capsys):
    # parity passes the (string-typed) schema but the perturbation module
    # rejects it, which the runner maps to the invariant-failure exit code
    cfg = tmp_path / "sideways.toml"
    cfg.write_text(
        "[experiment]\n"
        'command = "attack"\n'
        f'out_dir = "{tmp_path / "bad"}"\n'
        "\n[params]\n"
        'parity = "sideways"\n'
    )
    assert run_cli(["--config", cfg]) == 1
    assert "invariant failed" in capsys.readouterr().err
