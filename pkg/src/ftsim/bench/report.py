# src/ftsim/bench/report.py
"""
Report emission for campaign results.

Formats:
- csv:  runs.csv (one row per run, time buckets included) + aggregate.csv
- json: campaign.json, a CampaignReport that reloads with `load_report`
- md:   report.md rendered from templates/report.md.j2
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import List, Literal, Optional, Sequence

import pandas as pd
from jinja2 import Environment, FileSystemLoader, select_autoescape

from ..core.errors import StoreIOError
from ..core.schemas import CampaignReport, RunRecord
from ..utils.config import TEMPLATES_DIR
from .campaign import BUCKETS, aggregate, runs_frame

Format = Literal["csv", "json", "md"]
REPORT_JSON = "campaign.json"

log = logging.getLogger(__name__)


# ----- derived tables -----

def crossover_table(runs: Sequence[RunRecord]) -> pd.DataFrame:
    """
    Mean efficiency per scale (rows) and mode (columns).

    The `replication_wins` column flags scales where the best replicated mode
    beats checkpointing.
    """
    df = runs_frame(runs)
    df = df[df["mode"] != "plain"]
    if df.empty:
        return pd.DataFrame(columns=["cores", "mtbf"])
    df = df.assign(efficiency=df["efficiency"].astype(float))
    # observed (cores, mtbf) pairs only; a missing mtbf is its own key
    table = df.groupby(["cores", "mtbf", "mode"], dropna=False)["efficiency"].mean().unstack("mode")
    table = table.reset_index().sort_values("cores", kind="stable")
    table.columns.name = None
    replicated = [m for m in ("repl", "combined") if m in table.columns]
    if "ckpt" in table.columns and replicated:
        table["replication_wins"] = table[replicated].max(axis=1) > table["ckpt"]
    return table.reset_index(drop=True)


def crossover_scale(table: pd.DataFrame) -> Optional[int]:
    """First core count at which replication beats checkpointing, if any."""
    if "replication_wins" not in table.columns:
        return None
    wins = table[table["replication_wins"]]
    return None if wins.empty else int(wins["cores"].iloc[0])


def overhead_table(runs: Sequence[RunRecord]) -> pd.DataFrame:
    """
    Failure-free replication overhead per core count.

    `ratio` is repl efficiency / (0.5 x plain efficiency); 1.0 means the
    halved work is the only cost.
    """
    df = runs_frame(runs)
    df = df[(df["failures"] == 0) & df["mode"].isin(["plain", "repl"])]
    if df.empty:
        return pd.DataFrame(columns=["cores", "plain", "repl", "ratio"])
    df = df.assign(efficiency=df["efficiency"].astype(float))
    table = df.pivot_table(index="cores", columns="mode", values="efficiency", aggfunc="mean")
    table.columns.name = None
    table = table.reset_index()
    if {"plain", "repl"} <= set(table.columns):
        table = table.dropna(subset=["plain", "repl"])
        table["ratio"] = table["repl"] / (0.5 * table["plain"])
    return table


def bucket_residuals(runs: Sequence[RunRecord]) -> List[float]:
    """Relative |sum(buckets) - total| per run."""
    out = []
    for r in runs:
        total = r.metrics.total_s
        out.append(abs(r.metrics.bucket_sum() - total) / total if total > 0 else 0.0)
    return out


# ----- rendering -----

def _render_md(report: CampaignReport) -> str:
    env = Environment(
        loader=FileSystemLoader(str(TEMPLATES_DIR)),
        autoescape=select_autoescape(disabled_extensions=("md", "j2")),
    )
    tpl = env.get_template("report.md.j2")
    agg = aggregate(report.runs)
    shown = [c for c in agg.columns if not c.endswith("_std") or c == "efficiency_std"]
    crossover = crossover_table(report.runs)
    overhead = overhead_table(report.runs)
    buckets = runs_frame(report.runs)[["cores", "mode", "seed", *BUCKETS, "total_s"]]
    return tpl.render(
        name=report.name,
        n_runs=len(report.runs),
        reference=report.reference,
        constants=report.constants,
        aggregate_md=agg[shown].to_markdown(index=False, floatfmt=".4g") if not agg.empty else "",
        crossover_md=crossover.to_markdown(index=False, floatfmt=".4f") if not crossover.empty else "",
        crossover_at=crossover_scale(crossover),
        overhead_md=overhead.to_markdown(index=False, floatfmt=".4f") if not overhead.empty else "",
        buckets_md=buckets.to_markdown(index=False, floatfmt=".1f") if not buckets.empty else "",
        max_residual=max(bucket_residuals(report.runs), default=0.0),
        aborted=sum(1 for r in report.runs if r.aborted),
    )


def emit_report(report: CampaignReport, out_dir: str | Path, fmt: Format = "csv") -> List[Path]:
    """
    Write `report` under `out_dir` in `fmt`.

    Raises:
        ValueError: Unknown format.
        StoreIOError: The files cannot be written.
    """
    out = Path(out_dir)
    written: List[Path] = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        if fmt == "csv":
            runs_path, agg_path = out / "runs.csv", out / "aggregate.csv"
            runs_frame(report.runs).to_csv(runs_path, index=False)
            aggregate(report.runs).to_csv(agg_path, index=False)
            written += [runs_path, agg_path]
        elif fmt == "json":
            path = out / REPORT_JSON
            path.write_text(report.model_dump_json(indent=2), encoding="utf-8")
            written.append(path)
        elif fmt == "md":
            path = out / "report.md"
            path.write_text(_render_md(report), encoding="utf-8")
            written.append(path)
        else:
            raise ValueError(f"unknown report format {fmt!r}; expected csv, json or md")
    except OSError as exc:
        raise StoreIOError(f"cannot write {fmt} report under {out}: {exc}") from exc
    log.info("report written name=%s format=%s files=%d", report.name, fmt, len(written))
    return written


def load_report(in_dir: str | Path) -> CampaignReport:
    """
    Reload a report written with format json.

    Raises:
        StoreIOError: campaign.json is missing or unreadable.
    """
    path = Path(in_dir) / REPORT_JSON
    try:
        return CampaignReport.model_validate_json(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise StoreIOError(f"cannot read {path}: {exc}") from exc


__all__ = [
    "crossover_table",
    "crossover_scale",
    "overhead_table",
    "bucket_residuals",
    "emit_report",
    "load_report",
]
