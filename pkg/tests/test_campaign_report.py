# tests/test_campaign_report.py
from __future__ import annotations

import json

import pandas as pd
import pytest

from conftest import small_config
from ftsim.bench.campaign import (
    aggregate,
    apply_preset,
    reference_config,
    run_campaign,
    run_sweep,
    runs_frame,
    sweep_reference,
)
from ftsim.bench.report import (
    bucket_residuals,
    crossover_scale,
    crossover_table,
    emit_report,
    load_report,
    overhead_table,
)
from ftsim.core.errors import StoreIOError
from ftsim.core.schemas import CampaignConfig, CampaignReport, Metrics, RunRecord, SweepConfig


def _record(cores, mode, efficiency, *, mtbf=1000.0, seed=0, failures=1):
    M = cores // 2 if mode in ("repl", "combined") else 0
    return RunRecord(
        app="stencil_halo",
        cores=cores,
        N=cores - M,
        M=M,
        mode=mode,
        mtbf=mtbf,
        ckpt_cost=10.0,
        seed=seed,
        steps=5,
        failures=failures,
        metrics=Metrics(useful_work_s=8.0, idle_s=2.0, total_s=10.0, efficiency=efficiency),
    )


@pytest.fixture
def small_sweep():
    return SweepConfig(
        name="tiny",
        points=[
            small_config(mode="plain", cores=4),
            small_config(mode="repl", cores=4, replicas=2),
            small_config(mode="combined", cores=6, replicas=2, mtbf=30.0, seeds=[0, 1]),
        ],
    )


def test_apply_preset_fills_missing_values():
    at_scale = apply_preset(CampaignConfig(cores=2048, preset="hpcg"))
    assert (at_scale.mtbf, at_scale.ckpt_cost) == (8000.0, 65.0)
    fallback = apply_preset(CampaignConfig(cores=16, preset="hpcg"))
    assert (fallback.mtbf, fallback.ckpt_cost) == (2000.0, 215.0)
    explicit = apply_preset(CampaignConfig(cores=2048, preset="hpcg", mtbf=10.0))
    assert (explicit.mtbf, explicit.ckpt_cost) == (10.0, 65.0)
    with pytest.raises(KeyError):
        apply_preset(CampaignConfig(cores=16, preset="lulesh"))


def test_reference_config_is_plain_and_failure_free():
    ref = reference_config(small_config(mode="repl", cores=8, replicas=4, mtbf=50.0, seeds=[3, 4]))
    assert ref.mode == "plain"
    assert ref.n_ranks == 8
    assert ref.mtbf is None
    assert ref.seeds == [0]


def test_sweep_reference_defaults_to_smallest_point(small_sweep):
    ref = sweep_reference(small_sweep)
    assert ref.cores == 4 and ref.mode == "plain"


def test_campaign_does_not_depend_on_worker_count():
    config = small_config(mode="combined", cores=6, replicas=2, mtbf=20.0, seeds=[0, 1, 2])
    serial = run_campaign(config, workers=1)
    pooled = run_campaign(config, workers=2)
    assert [r.seed for r in pooled] == [0, 1, 2]
    assert [r.trace_hash for r in serial] == [r.trace_hash for r in pooled]
    assert [r.metrics.efficiency for r in serial] == [r.metrics.efficiency for r in pooled]


def test_run_sweep_orders_runs_and_reports_progress(small_sweep):
    seen = []
    report = run_sweep(small_sweep, progress=lambda point, done: seen.append((point.mode, done)))
    assert seen == [("plain", 1), ("repl", 2), ("combined", 3)]
    assert [(r.mode, r.seed) for r in report.runs] == [("plain", 0), ("repl", 0), ("combined", 0), ("combined", 1)]
    assert report.runs[0].metrics.efficiency == pytest.approx(1.0)
    assert report.reference is not None
    assert report.constants["seconds_per_step"] == 10.0
    assert max(bucket_residuals(report.runs)) < 1e-9


def test_emit_and_reload_report(tmp_path, small_sweep):
    report = run_sweep(small_sweep)
    written = {p.name for fmt in ("csv", "json", "md") for p in emit_report(report, tmp_path, fmt)}
    assert written == {"runs.csv", "aggregate.csv", "campaign.json", "report.md"}

    runs = pd.read_csv(tmp_path / "runs.csv")
    assert len(runs) == 4
    assert {"useful_work_s", "rollback_s", "efficiency", "audit_lost"} <= set(runs.columns)
    agg = pd.read_csv(tmp_path / "aggregate.csv")
    assert agg["runs"].tolist() == [1, 1, 2]

    back = load_report(tmp_path)
    assert back == report
    assert json.loads((tmp_path / "campaign.json").read_text(encoding="utf-8"))["name"] == "tiny"

    md = (tmp_path / "report.md").read_text(encoding="utf-8")
    assert md.startswith("# Campaign report: tiny")
    assert "## Efficiency per scale" in md
    assert "| seconds_per_step |" in md


def test_emit_report_rejects_unknown_format(tmp_path):
    with pytest.raises(ValueError):
        emit_report(CampaignReport(), tmp_path, "xlsx")


def test_load_report_missing(tmp_path):
    with pytest.raises(StoreIOError):
        load_report(tmp_path)


def test_aggregate_groups_seeds():
    runs = [_record(32, "ckpt", 0.8, seed=0), _record(32, "ckpt", 0.6, seed=1), _record(32, "repl", 0.45)]
    agg = aggregate(runs)
    ckpt = agg[agg["mode"] == "ckpt"].iloc[0]
    assert ckpt["runs"] == 2
    assert ckpt["efficiency_mean"] == pytest.approx(0.7)
    assert list(runs_frame(runs).columns[:9]) == ["label", "app", "cores", "N", "M", "mode", "mtbf", "ckpt_cost", "tau"]
    assert aggregate([]).empty


def test_crossover_table_finds_first_winning_scale():
    runs = [
        _record(32, "ckpt", 0.80, mtbf=8000.0),
        _record(32, "repl", 0.48, mtbf=8000.0),
        _record(64, "ckpt", 0.55, mtbf=4000.0),
        _record(64, "repl", 0.47, mtbf=4000.0),
        _record(128, "ckpt", 0.30, mtbf=2000.0),
        _record(128, "repl", 0.46, mtbf=2000.0),
        _record(128, "plain", 1.0, mtbf=2000.0),
    ]
    table = crossover_table(runs)
    assert table["cores"].tolist() == [32, 64, 128]
    assert table["replication_wins"].tolist() == [False, False, True]
    assert crossover_scale(table) == 128
    assert crossover_scale(crossover_table(runs[:4])) is None
    assert crossover_scale(crossover_table([_record(32, "plain", 1.0)])) is None


def test_crossover_table_keeps_only_observed_points():
    runs = [
        _record(16, "ckpt", 0.9, mtbf=None),
        _record(16, "repl", 0.5, mtbf=None),
        _record(32, "ckpt", 0.7, mtbf=4000.0),
        _record(32, "repl", 0.5, mtbf=4000.0),
        _record(64, "ckpt", 0.4, mtbf=2000.0),
    ]
    table = crossover_table(runs)
    assert table["cores"].tolist() == [16, 32, 64]
    assert table["ckpt"].tolist() == pytest.approx([0.9, 0.7, 0.4])
    assert pd.isna(table["repl"].iloc[2])
    assert table["replication_wins"].tolist() == [False, False, False]


def test_overhead_table_from_real_runs():
    plain = small_config(mode="plain", cores=8)
    repl = small_config(mode="repl", cores=8, replicas=4)
    runs = run_campaign(plain) + run_campaign(repl)
    table = overhead_table(runs)
    assert table["cores"].tolist() == [8]
    assert table["ratio"].iloc[0] == pytest.approx(1.0, rel=0.01)
    assert overhead_table([_record(8, "ckpt", 0.9)]).empty


@pytest.mark.slow
def test_replication_overtakes_checkpointing_at_scale():
    # per-core MTBF fixed, checkpoint cost growing with the machine
    points = []
    for cores, mtbf, cost in [(16, 2000.0, 40.0), (32, 1000.0, 80.0), (64, 500.0, 160.0)]:
        common = dict(cores=cores, mtbf=mtbf, ckpt_cost=cost, target_time=2000.0, seconds_per_step=50.0,
                      cells_per_rank=8, seeds=[0, 1, 2])
        points.append(CampaignConfig(mode="ckpt", **common))
        points.append(CampaignConfig(mode="repl", replication=0.5, **common))
    report = run_sweep(SweepConfig(name="crossover", points=points), workers=2)
    table = crossover_table(report.runs)
    assert table["ckpt"].is_monotonic_decreasing
    assert table["ckpt"].iloc[0] > table["repl"].iloc[0]
    assert crossover_scale(table) is not None
