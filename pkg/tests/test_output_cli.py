import csv
import json

import numpy as np
import pytest

from klreplay.attacker import AttackSchedule
from klreplay.cli import main
from klreplay.controller import Watermark
from klreplay.harness import ScenarioConfig, dump_scenario, iter_traces, prepare, resolve_thresholds, run_monte_carlo
from klreplay.harness.output import trace_columns, write_report

SCENARIO = """\
name: cli-test
watermark:
  tau: [[1.0]]
attack:
  mode: replay
  record_from: 0
  attack_start: 80
horizon: 150
window_capacity: 20
runs: 6
"""


@pytest.fixture
def scenario(tmp_path):
    path = tmp_path / "s.yaml"
    path.write_text(SCENARIO)
    return path


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_trace_columns():
    assert trace_columns(2, 1, 1) == [
        "run", "k", "x0", "x1", "xhat0", "xhat1", "y_delivered0", "z0", "u0", "du0",
        "kl_stat", "chi2_stat", "kl_alarm", "chi2_alarm", "step_cost",
    ]


def test_report_files(tmp_path):
    cfg = ScenarioConfig(horizon=60, runs=3, window_capacity=10, kl_threshold=0.2,
                         watermark=Watermark([[1.0]]),
                         attack=AttackSchedule(mode="replay", record_from=0, attack_start=30))
    loop = prepare(cfg)
    th = resolve_thresholds(cfg, loop)
    report = run_monte_carlo(cfg, thresholds=th, loop=loop)
    out = write_report(tmp_path / "o", report, iter_traces(cfg, loop, th))
    rows = read_csv(out / "traces.csv")
    assert len(rows) == 1 + 3 * 60
    assert [int(r[0]) for r in rows[1:]] == [i for i in range(3) for _ in range(60)]
    assert [int(r[1]) for r in rows[1:61]] == list(range(60))
    # values reload exactly
    first = list(iter_traces(cfg, loop, th, runs=1))[0]
    assert float(rows[5][2]) == first.x[4, 0]
    agg = read_csv(out / "aggregate.csv")
    assert agg[0][0] == "k" and len(agg) == 61
    runs = read_csv(out / "runs.csv")
    assert len(runs) == 4
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config_sha256"] == cfg.digest()
    assert manifest["seed"] == 0 and manifest["version"]
    comp = manifest["summary"]["delay_comparison"]
    assert {"kl_median_delay", "chi2_median_delay", "kl_not_slower"} <= set(comp)


def test_cli_run_is_byte_identical(scenario, tmp_path):
    assert main(["run", str(scenario), "--out", str(tmp_path / "a")]) == 0
    assert main(["run", str(scenario), "--out", str(tmp_path / "b"), "--workers", "2"]) == 0
    for name in ("traces.csv", "aggregate.csv", "runs.csv", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_cli_seed_and_runs_override(scenario, tmp_path):
    assert main(["run", str(scenario), "--out", str(tmp_path / "c"), "--seed", "9", "--runs", "2", "--no-traces"]) == 0
    manifest = json.loads((tmp_path / "c" / "manifest.json").read_text())
    assert manifest["seed"] == 9 and manifest["runs"] == 2
    assert not (tmp_path / "c" / "traces.csv").exists()


def test_cli_validate(scenario, capsys):
    assert main(["validate", str(scenario)]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["M"][0][0] == pytest.approx(-0.618034, abs=1e-6)
    assert info["replay_without_watermark"] == "stealthy"


def test_cli_calibrate(scenario, capsys):
    assert main(["calibrate", str(scenario), "--runs", "5"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["kl_threshold"] > 0 and out["samples"] == 5 * (150 - 50)


def test_cli_scan(scenario, capsys):
    assert main(["scan-tau", str(scenario), "--scales", "2,0,1"]) == 0
    rows = list(csv.reader(capsys.readouterr().out.splitlines()))
    assert rows[0] == ["scale", "cost_penalty", "detectability", "kl"]
    assert [float(r[0]) for r in rows[1:]] == [0.0, 1.0, 2.0]


def test_cli_scan_needs_watermark(tmp_path):
    path = tmp_path / "plain.yaml"
    path.write_text("horizon: 10\n")
    assert main(["scan-tau", str(path), "--scales", "1"]) == 2


def test_cli_preset(tmp_path, capsys):
    assert main(["preset", "figure5", "--out", str(tmp_path), "--runs", "2", "--no-traces"]) == 0
    assert (tmp_path / "watermark" / "aggregate.csv").exists()
    assert (tmp_path / "no_watermark" / "manifest.json").exists()


@pytest.mark.parametrize(
    "text,code",
    [
        ("horizn: 3\n", 2),
        ("horizon: 5\nattack: {mode: replay, attack_start: 9}\n", 2),
        ("model: {A: [[2.0]], C: [[0.0]]}\n", 3),
        ("window_capacity: 1\nruns: 2\nhorizon: 60\n", 4),
    ],
)
def test_cli_exit_codes(tmp_path, text, code):
    path = tmp_path / "s.yaml"
    path.write_text(text)
    cmd = "calibrate" if "window_capacity" in text else "validate"
    assert main([cmd, str(path)]) == code


def test_cli_no_authority_reports_infinite_cost(tmp_path, capsys):
    path = tmp_path / "s.yaml"
    path.write_text("model: {A: [[2.0]], B: [[0.0]]}\n")
    with pytest.warns(UserWarning):
        assert main(["validate", str(path)]) == 0
    assert json.loads(capsys.readouterr().out)["lqg_cost"] is None


def test_cli_missing_file(tmp_path):
    assert main(["validate", str(tmp_path / "absent.yaml")]) == 2


def test_scenario_dump_is_loadable(tmp_path):
    cfg = ScenarioConfig(horizon=20, kl_threshold=0.5)
    path = tmp_path / "d.yaml"
    path.write_text(dump_scenario(cfg))
    assert main(["validate", str(path)]) == 0
