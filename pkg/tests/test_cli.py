import json
import subprocess
import sys

import pytest

from prioritycsma.cli import main

BASE = {"schema": 1, "graph": {"kind": "circle", "n": 9}, "lambda": 0.3, "horizon": 12_000, "seed": 3,
        "decimation": 50, "fluid": {"x0": [1.0] * 9}}


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(BASE))
    return path


def files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_simulate_outputs(config, tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", "--config", str(config), "--out", str(out)]) == 0
    got = files(out)
    assert set(got) == {"trace.csv", "summary.json"}
    header = got["trace.csv"].decode().splitlines()[0]
    assert header == "slot,total_queue," + ",".join(f"x{i}" for i in range(9))
    summary = json.loads(got["summary.json"])
    assert summary["classification"]["verdict"] == "stable"
    assert "wall_time" not in summary


def test_simulate_json_format(config, tmp_path):
    out = tmp_path / "simj"
    assert main(["simulate", "--config", str(config), "--out", str(out), "--format", "json"]) == 0
    assert set(files(out)) == {"trace.json", "summary.json"}


def test_seed_override_changes_output(config, tmp_path):
    main(["simulate", "--config", str(config), "--out", str(tmp_path / "a")])
    main(["simulate", "--config", str(config), "--out", str(tmp_path / "b"), "--seed", "4"])
    assert files(tmp_path / "a") != files(tmp_path / "b")


@pytest.mark.parametrize("argv", [
    ["simulate"],
    ["fluid", "--T", "5"],
    ["stability"],
    ["fairness", "--samples", "200"],
    ["scaling", "--r", "10,20", "--T", "2"],
    ["sweep", "--lambda-grid", "0.3,0.4"],
])
def test_commands_are_deterministic(config, tmp_path, argv):
    argv = argv[:1] + ["--config", str(config)] + argv[1:]
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(argv + ["--out", str(a)]) == 0
    assert main(argv + ["--out", str(b)]) == 0
    assert files(a) and files(a) == files(b)


def test_conjecture_command(tmp_path):
    argv = ["conjecture", "--nmin", "3", "--nmax", "5", "--samples", "3000", "--descent", "3", "--out"]
    main(argv + [str(tmp_path / "a")])
    main(argv + [str(tmp_path / "b")])
    assert files(tmp_path / "a") == files(tmp_path / "b")
    report = json.loads((tmp_path / "a" / "conjecture.json").read_text())
    assert report["counterexample"] is False


def test_stdout_json(config, capsys):
    assert main(["stability", "--config", str(config)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["status"] == "strictly_dominated"


def test_config_error_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(dict(BASE, colour="red")))
    assert main(["simulate", "--config", str(bad)]) == 2
    assert main(["simulate", "--config", str(tmp_path / "none.json")]) == 2
    assert main(["fluid", "--config", str(bad), "--T", "1"]) == 2


def test_fairness_requires_positive_state(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(dict(BASE, fluid={"x0": [0.0] * 9})))
    assert main(["fairness", "--config", str(cfg)]) == 2


def test_oracle_failure_exit_code(config, monkeypatch):
    from prioritycsma import cli
    from prioritycsma.stability import FairnessReport
    import numpy as np

    monkeypatch.setattr(cli, "two_fairness_check",
                        lambda *a, **k: FairnessReport(-1.0, np.ones(9), 0.0, 1, 0))
    assert main(["fairness", "--config", str(config)]) == 3


def test_module_entry_point(config):
    proc = subprocess.run([sys.executable, "-m", "prioritycsma", "stability", "--config", str(config)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    proc = subprocess.run([sys.executable, "-m", "prioritycsma", "sweep", "--config", str(config),
                           "--lambda-grid", "x"], capture_output=True, text=True)
    assert proc.returncode == 2
