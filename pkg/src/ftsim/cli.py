# src/ftsim/cli.py
"""
Command-line entry point.

    ftsim run    --app stencil_halo --cores 64 --replicas 0.5 --mode repl --mtbf 4000 --seed 0 --out results/run
    ftsim sweep  --config configs/crossover.json --workers 4 --out results/crossover
    ftsim report --in results/crossover --format md
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from dotenv import load_dotenv
from pydantic import ValidationError

from .bench.campaign import reference_config, run_campaign, run_point, run_sweep, with_efficiency
from .bench.report import emit_report, load_report
from .core import settings
from .core.checkpoint import CheckpointStore
from .core.errors import FtsimError
from .core.schemas import CampaignConfig, CampaignReport, SimConfig, SweepConfig
from .utils.config import DOTENV_PATH, RESULTS_DIR

log = logging.getLogger("ftsim.cli")

FORMATS = ("csv", "json", "md")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ftsim", description="Replication vs checkpointing fault-tolerance simulator.")
    parser.add_argument("--log-level", default=None, help="Logging level (default: FTSIM_LOG_LEVEL or WARNING).")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run one campaign point over one or more seeds.")
    run.add_argument("--config", type=Path, help="CampaignConfig JSON; flags below override it.")
    run.add_argument("--app", choices=["stencil_halo", "cg_like", "particle_like"])
    run.add_argument("--cores", type=int)
    run.add_argument("--replicas", type=float, help="Replication fraction in [0, 1].")
    run.add_argument("--mode", choices=list(settings.MODES))
    run.add_argument("--mtbf", type=float, help="System MTBF (s).")
    run.add_argument("--ckpt-cost", type=float, help="Checkpoint creation time C (s).")
    run.add_argument("--tau", type=float, help="Explicit checkpoint interval (s).")
    run.add_argument("--preset", help="Fill MTBF and C from a preset (hpcg, cloverleaf, pic).")
    run.add_argument("--steps", type=int)
    run.add_argument("--seconds-per-step", type=float)
    run.add_argument("--time-scale", type=float)
    run.add_argument("--schedule", help="Failure schedule file replacing sampled failures.")
    run.add_argument("--seed", type=int, nargs="+", help="One or more run seeds.")
    run.add_argument("--store", type=Path, help="Directory checkpoint store to write.")
    run.add_argument("--restart-from", type=Path, help="Resume the job stored in this directory.")
    run.add_argument("--trace", action="store_true", help="Write trace.ndjson beside the results.")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--out", type=Path, default=RESULTS_DIR / "run")
    run.add_argument("--format", nargs="+", choices=FORMATS, default=["csv", "json"])

    sweep = sub.add_parser("sweep", help="Run every point of a sweep file.")
    sweep.add_argument("--config", type=Path, required=True, help="SweepConfig JSON.")
    sweep.add_argument("--workers", type=int, default=1)
    sweep.add_argument("--out", type=Path, default=None)
    sweep.add_argument("--format", nargs="+", choices=FORMATS, default=["csv", "json"])

    report = sub.add_parser("report", help="Re-emit a saved campaign.json in other formats.")
    report.add_argument("--in", dest="in_dir", type=Path, required=True)
    report.add_argument("--format", nargs="+", choices=FORMATS, default=["md"])
    report.add_argument("--out", type=Path, default=None)
    return parser


def _campaign_from_args(args: argparse.Namespace) -> CampaignConfig:
    base = {} if args.config is None else CampaignConfig.from_file(args.config).model_dump()
    overrides = {
        "app": args.app,
        "cores": args.cores,
        "replication": args.replicas,
        "mode": args.mode,
        "mtbf": args.mtbf,
        "ckpt_cost": args.ckpt_cost,
        "tau": args.tau,
        "preset": args.preset,
        "steps": args.steps,
        "seconds_per_step": args.seconds_per_step,
        "time_scale": args.time_scale,
        "schedule": args.schedule,
        "seeds": args.seed,
    }
    base.update({k: v for k, v in overrides.items() if v is not None})
    if args.replicas is not None:
        base["replicas"] = None
    if args.trace:
        base.setdefault("sim", SimConfig().model_dump())["trace"] = True
    return CampaignConfig.model_validate(base)


def _emit(report: CampaignReport, out: Path, formats: Sequence[str]) -> None:
    for fmt in dict.fromkeys(formats):
        for path in emit_report(report, out, fmt):
            print(f"✅ Report saved: {path}")


def _cmd_run(args: argparse.Namespace) -> int:
    config = _campaign_from_args(args)
    out: Path = args.out
    single = args.store is not None or args.restart_from is not None or config.sim.trace
    if single:
        out.mkdir(parents=True, exist_ok=True)
        seed = config.seeds[0]
        store = CheckpointStore.at(args.store) if args.store is not None else None
        restart = CheckpointStore.at(args.restart_from) if args.restart_from is not None else None
        trace = out / "trace.ndjson" if config.sim.trace else None
        record = run_point(config, seed, store=store, trace_path=trace, restart_from=restart)
        reference = run_point(reference_config(config), 0).metrics
        runs = [with_efficiency(record, reference)]
    else:
        reference = run_point(reference_config(config), 0).metrics
        runs = run_campaign(config, workers=args.workers, reference=reference)
    for r in runs:
        print(
            f"seed={r.seed} mode={r.mode} cores={r.cores} N={r.N} M={r.M} "
            f"efficiency={r.metrics.efficiency:.4f} failures={r.failures} rollbacks={r.rollbacks} "
            f"aborted={r.aborted} trace={r.trace_hash[:16]}"
        )
    _emit(CampaignReport(name=config.label or "run", reference=reference, runs=runs), out, args.format)
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    sweep = SweepConfig.from_file(args.config)
    out: Path = args.out or RESULTS_DIR / sweep.name

    def progress(point: CampaignConfig, done: int) -> None:
        print(f"[sweep] {done}/{len(sweep.points)} mode={point.mode} cores={point.cores} seeds={len(point.seeds)}")

    report = run_sweep(sweep, workers=args.workers, progress=progress)
    _emit(report, out, args.format)
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    report = load_report(args.in_dir)
    _emit(report, args.out or args.in_dir, args.format)
    return 0


COMMANDS = {"run": _cmd_run, "sweep": _cmd_sweep, "report": _cmd_report}


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv(DOTENV_PATH, override=False)
    parser = _build_parser()
    args = parser.parse_args(argv)
    level = (args.log_level or os.getenv("FTSIM_LOG_LEVEL", settings.LOG_LEVEL)).upper()
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        parser.error(f"invalid configuration:\n{exc}")
    except (FtsimError, KeyError, ValueError) as exc:
        log.exception("ftsim %s failed: %s", args.command, exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
