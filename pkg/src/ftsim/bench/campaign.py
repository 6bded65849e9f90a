# src/ftsim/bench/campaign.py
"""
Campaign orchestration: repeat a configuration over seeds, sweep several
configurations, and aggregate the results.

Runs are independent simulations; `workers` > 1 spreads seeds over a process
pool. Results are always ordered by (point, seed), so the output does not
depend on the worker count.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import pandas as pd

from ..core.checkpoint import CheckpointStore, find_preset
from ..core.schemas import CampaignConfig, CampaignReport, Metrics, RunRecord, SweepConfig
from .apps import MiniApp, build_app
from .job import Job, RunResult
from .metrics import compute_efficiency

log = logging.getLogger(__name__)

BUCKETS = (
    "useful_work_s",
    "redundant_work_s",
    "checkpoint_create_s",
    "restore_s",
    "rollback_s",
    "log_removal_s",
    "idle_s",
)


# ------------------------------------------------------------------------------
# Config helpers
# ------------------------------------------------------------------------------
def apply_preset(config: CampaignConfig) -> CampaignConfig:
    """
    Fill mtbf and ckpt_cost from `config.preset`; explicit values win.

    The row matching `config.cores` is used when there is one, otherwise the
    largest-scale row.
    """
    if not config.preset:
        return config
    try:
        row = find_preset(config.preset, config.cores)
    except KeyError:
        row = find_preset(config.preset)
    update = {}
    if config.mtbf is None:
        update["mtbf"] = row.mtbf
    if config.ckpt_cost is None:
        update["ckpt_cost"] = row.ckpt_cost
    return config.model_copy(update=update)


def reference_config(config: CampaignConfig) -> CampaignConfig:
    """The failure-free plain run at the same scale and work as `config`."""
    return config.model_copy(
        update={
            "mode": "plain",
            "mtbf": None,
            "tau": None,
            "replicas": 0,
            "replication": 0.0,
            "schedule": None,
            "preset": None,
            "seeds": [0],
        }
    )


def build_app_for(config: CampaignConfig) -> MiniApp:
    return build_app(
        config.app,
        total_steps=config.total_steps,
        seconds_per_step=config.seconds_per_step,
        cells_per_rank=config.cells_per_rank,
    )


def to_record(config: CampaignConfig, seed: int, result: RunResult, job: Job) -> RunRecord:
    return RunRecord(
        label=config.label,
        app=config.app,
        cores=config.cores,
        N=config.n_ranks,
        M=config.n_replicas,
        mode=config.mode,
        mtbf=config.effective_mtbf,
        ckpt_cost=job.policy.C,
        tau=job.policy.tau,
        seed=seed,
        steps=result.steps,
        aborted=result.aborted,
        checksum=result.checksum,
        trace_hash=result.trace_hash,
        failures=result.failures,
        repairs=result.repairs,
        rollbacks=result.rollbacks,
        restarts=result.restarts,
        waves=result.waves,
        events=result.events,
        audit=result.audit,
        metrics=result.metrics,
    )


# ------------------------------------------------------------------------------
# Single runs
# ------------------------------------------------------------------------------
def run_point(
    config: CampaignConfig,
    seed: int,
    *,
    store: Optional[CheckpointStore] = None,
    trace_path: Optional[Path] = None,
    restart_from: Optional[CheckpointStore] = None,
) -> RunRecord:
    """
    Run one (config, seed) simulation.

    Parameters
    ----------
    config : CampaignConfig
        Point to run (presets already applied or not).
    seed : int
        Run seed.
    store : Optional[CheckpointStore]
        Checkpoint store to write; in-memory by default.
    trace_path : Optional[Path]
        NDJSON event-trace destination.
    restart_from : Optional[CheckpointStore]
        Resume the job stored there instead of starting fresh.

    Returns
    -------
    RunRecord
        Metrics, counters and audit of the run.
    """
    config = apply_preset(config)
    app = build_app_for(config)
    t0 = time.perf_counter()
    if restart_from is not None:
        job = Job.from_store(app, config, restart_from, seed=seed, trace_path=trace_path)
    else:
        job = Job(app, config, seed=seed, store=store, trace_path=trace_path)
    result = job.run()
    log.debug(
        "run done app=%s cores=%d mode=%s seed=%d events=%d host_ms=%d",
        config.app, config.cores, config.mode, seed, result.events, int((time.perf_counter() - t0) * 1000),
    )
    return to_record(config, seed, result, job)


def _run_point_args(args: tuple) -> RunRecord:
    config, seed = args
    return run_point(config, seed)


def _map(tasks: Sequence[tuple], workers: int) -> List[RunRecord]:
    if workers <= 1 or len(tasks) <= 1:
        return [_run_point_args(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_point_args, tasks))


# ------------------------------------------------------------------------------
# Campaigns
# ------------------------------------------------------------------------------
def run_campaign(
    config: CampaignConfig,
    *,
    workers: int = 1,
    reference: Optional[Metrics] = None,
) -> List[RunRecord]:
    """
    Run `config` once per seed and fill in efficiencies.

    Without an explicit reference, the failure-free plain run at the same
    scale is simulated and used.
    """
    config = apply_preset(config)
    records = _map([(config, seed) for seed in config.seeds], workers)
    if reference is None:
        reference = run_point(reference_config(config), 0).metrics
    return [with_efficiency(r, reference) for r in records]


def with_efficiency(record: RunRecord, reference: Metrics) -> RunRecord:
    metrics = record.metrics.model_copy(update={"efficiency": compute_efficiency(record.metrics, reference)})
    return record.model_copy(update={"metrics": metrics})


def sweep_reference(sweep: SweepConfig) -> CampaignConfig:
    """Explicit reference, else the smallest point run plain and failure-free."""
    if sweep.reference is not None:
        return apply_preset(sweep.reference)
    smallest = min(sweep.points, key=lambda p: p.cores)
    return reference_config(apply_preset(smallest))


def run_sweep(
    sweep: SweepConfig,
    *,
    workers: int = 1,
    progress: Optional[Callable[[CampaignConfig, int], None]] = None,
) -> CampaignReport:
    """
    Run every point of `sweep` and compute efficiencies against one reference.

    `progress(point, n_done)` is called after each point is collected.
    """
    t0 = time.perf_counter()
    ref_cfg = sweep_reference(sweep)
    reference = run_point(ref_cfg, ref_cfg.seeds[0]).metrics

    points = [apply_preset(p) for p in sweep.points]
    tasks = [(p, seed) for p in points for seed in p.seeds]
    records = _map(tasks, workers)

    runs: List[RunRecord] = []
    offset = 0
    for i, point in enumerate(points):
        chunk = records[offset:offset + len(point.seeds)]
        offset += len(point.seeds)
        runs.extend(with_efficiency(r, reference) for r in chunk)
        if progress is not None:
            progress(point, i + 1)

    report = CampaignReport(name=sweep.name, reference=reference, runs=runs, constants=cost_constants(ref_cfg))
    log.info(
        "sweep done name=%s points=%d runs=%d ms=%d",
        sweep.name, len(points), len(runs), int((time.perf_counter() - t0) * 1000),
    )
    return report


def cost_constants(config: CampaignConfig) -> Dict[str, float]:
    sim = config.sim
    return {
        "latency_base_s": sim.latency_base_s,
        "latency_per_byte_s": sim.latency_per_byte_s,
        "comm_create_s": sim.comm_create_s,
        "state_bytes": float(sim.state_bytes),
        "ckpt_bandwidth": sim.ckpt_bandwidth,
        "trim_bandwidth": sim.trim_bandwidth,
        "weibull_shape": sim.weibull_shape,
        "seconds_per_step": config.seconds_per_step,
    }


# ------------------------------------------------------------------------------
# Aggregation
# ------------------------------------------------------------------------------
POINT_KEYS = ["label", "app", "cores", "N", "M", "mode", "mtbf", "ckpt_cost", "tau"]


def runs_frame(runs: Sequence[RunRecord]) -> pd.DataFrame:
    """One row per run with the metrics flattened; stable column order."""
    rows = []
    for r in runs:
        row = r.model_dump(exclude={"metrics", "audit"})
        row.update(r.metrics.model_dump())
        row["audit_lost"] = r.audit.lost
        row["audit_duplicated"] = r.audit.duplicated
        row["audit_suppressed"] = r.audit.suppressed
        rows.append(row)
    columns = (
        POINT_KEYS
        + ["seed", "steps", "aborted", "failures", "repairs", "rollbacks", "restarts", "waves", "events"]
        + list(BUCKETS)
        + ["total_s", "flops_total", "flops_per_core", "efficiency"]
        + ["audit_lost", "audit_duplicated", "audit_suppressed", "checksum", "trace_hash"]
    )
    return pd.DataFrame(rows, columns=columns)


def aggregate(runs: Sequence[RunRecord]) -> pd.DataFrame:
    """Mean and standard deviation per campaign point over its seeds."""
    df = runs_frame(runs)
    if df.empty:
        return df
    keys = [k for k in POINT_KEYS if k != "label"]
    values = ["efficiency", "flops_per_core", "total_s", *BUCKETS, "failures", "rollbacks"]
    df["efficiency"] = df["efficiency"].astype(float)
    grouped = df.groupby(keys, dropna=False, sort=False)[values]
    out = grouped.agg(["mean", "std"])
    out.columns = [f"{col}_{stat}" for col, stat in out.columns]
    out["runs"] = grouped.size()
    return out.reset_index()


__all__ = [
    "BUCKETS",
    "apply_preset",
    "reference_config",
    "build_app_for",
    "run_point",
    "run_campaign",
    "run_sweep",
    "sweep_reference",
    "with_efficiency",
    "runs_frame",
    "aggregate",
]
