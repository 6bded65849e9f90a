# tests/test_cli.py
from __future__ import annotations

import json

import pytest

from ftsim.cli import main

RUN = ["run", "--app", "stencil_halo", "--cores", "4", "--steps", "3", "--seconds-per-step", "10"]


def test_run_writes_requested_formats(tmp_path, capsys):
    out = tmp_path / "run"
    code = main([*RUN, "--mode", "ckpt", "--tau", "12", "--seed", "0", "1", "--out", str(out), "--format", "csv", "json"])
    assert code == 0
    assert (out / "runs.csv").is_file()
    report = json.loads((out / "campaign.json").read_text(encoding="utf-8"))
    assert [r["seed"] for r in report["runs"]] == [0, 1]
    assert "Report saved" in capsys.readouterr().out


def test_run_with_store_and_restart(tmp_path):
    store = tmp_path / "store"
    assert main([*RUN, "--mode", "ckpt", "--tau", "12", "--store", str(store), "--out", str(tmp_path / "a")]) == 0
    assert (store / "LATEST").is_file()
    assert main([*RUN, "--mode", "ckpt", "--restart-from", str(store), "--trace", "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "b" / "trace.ndjson").is_file()


def test_sweep_then_report(tmp_path):
    sweep = {
        "name": "cli",
        "points": [
            {"app": "cg_like", "cores": 4, "mode": "plain", "steps": 3, "seconds_per_step": 10},
            {"app": "cg_like", "cores": 4, "replicas": 2, "mode": "repl", "steps": 3, "seconds_per_step": 10},
        ],
    }
    path = tmp_path / "sweep.json"
    path.write_text(json.dumps(sweep), encoding="utf-8")
    out = tmp_path / "out"
    assert main(["sweep", "--config", str(path), "--out", str(out), "--format", "json"]) == 0
    assert main(["report", "--in", str(out), "--format", "md", "csv"]) == 0
    assert (out / "report.md").is_file()
    assert (out / "aggregate.csv").is_file()


def test_invalid_layout_is_a_usage_error(tmp_path):
    with pytest.raises(SystemExit) as err:
        main([*RUN, "--mode", "ckpt", "--replicas", "0.5", "--out", str(tmp_path)])
    assert err.value.code == 2


def test_missing_report_returns_failure(tmp_path):
    assert main(["report", "--in", str(tmp_path / "nothing")]) == 1
