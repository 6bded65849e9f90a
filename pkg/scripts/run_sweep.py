"""
Runner: executes a sweep file and writes csv, json and Markdown reports.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
SRC = ROOT / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from ftsim.bench.campaign import run_sweep
from ftsim.bench.report import emit_report
from ftsim.core.schemas import SweepConfig
from ftsim.utils.config import CONFIGS_DIR, RESULTS_DIR


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--config", default=str(CONFIGS_DIR / "crossover.json"), help="SweepConfig JSON file.")
    parser.add_argument("--workers", type=int, default=1, help="Worker processes for the seeds.")
    parser.add_argument("--out", default=None, help="Output folder (default: results/<sweep name>).")
    args = parser.parse_args()

    sweep = SweepConfig.from_file(args.config)
    out_dir = Path(args.out) if args.out else RESULTS_DIR / sweep.name
    report = run_sweep(sweep, workers=args.workers)
    for fmt in ("csv", "json", "md"):
        for path in emit_report(report, out_dir, fmt):
            print(f"✅ Report saved: {path}")


if __name__ == "__main__":
    main()
