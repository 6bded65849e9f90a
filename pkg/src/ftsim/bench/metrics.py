# src/ftsim/bench/metrics.py
from __future__ import annotations

from collections import Counter
from enum import Enum
from typing import Dict

from ..core.failure import Classification
from ..core.schemas import Metrics


class Phase(str, Enum):
    APP = "app"
    CREATE = "create"
    RESTORE = "restore"
    ROLLBACK = "rollback"


_PHASE_BUCKET = {
    Phase.CREATE: "checkpoint_create_s",
    Phase.RESTORE: "restore_s",
    Phase.ROLLBACK: "rollback_s",
}


class TimeLedger:
    """
    Core-averaged time buckets of one job.

    While the application runs, elapsed time splits by role: computational
    cores do useful work, replica cores redundant work, dead cores idle.
    Stop-the-world phases charge their whole duration to their bucket.
    """

    def __init__(self, cores: int, *, start: float = 0.0) -> None:
        self.cores = cores
        self.last = start
        self.start = start
        self.phase = Phase.APP
        self.n_cmp = 0
        self.n_rep = 0
        self.buckets: Dict[str, float] = {name: 0.0 for name in Metrics.model_fields if name.endswith("_s") and name != "total_s"}
        self._since_useful = 0.0
        self._since_redundant = 0.0
        self.failures: Counter[str] = Counter()

    def advance(self, now: float) -> None:
        dt = now - self.last
        if dt <= 0:
            return
        self.last = now
        if self.phase is not Phase.APP:
            self.buckets[_PHASE_BUCKET[self.phase]] += dt
            return
        useful = dt * self.n_cmp / self.cores
        redundant = dt * self.n_rep / self.cores
        self.buckets["useful_work_s"] += useful
        self.buckets["redundant_work_s"] += redundant
        self.buckets["idle_s"] += dt - useful - redundant
        self._since_useful += useful
        self._since_redundant += redundant

    def set_phase(self, phase: Phase, now: float) -> None:
        self.advance(now)
        self.phase = phase

    def set_live(self, n_cmp: int, n_rep: int, now: float) -> None:
        self.advance(now)
        self.n_cmp, self.n_rep = n_cmp, n_rep

    def commit(self) -> None:
        """A checkpoint wave committed: earlier work can no longer be lost."""
        self._since_useful = self._since_redundant = 0.0

    def regress(self) -> float:
        """Move application time since the last commit into the rollback bucket."""
        lost = self._since_useful + self._since_redundant
        self.buckets["useful_work_s"] -= self._since_useful
        self.buckets["redundant_work_s"] -= self._since_redundant
        self.buckets["rollback_s"] += lost
        self.commit()
        return lost

    def log_trim(self, seconds: float, *, replica: bool) -> None:
        # one core's trim time, core-averaged
        share = seconds / self.cores
        key = "redundant_work_s" if replica else "useful_work_s"
        share = min(share, self.buckets[key])
        self.buckets[key] -= share
        self.buckets["log_removal_s"] += share
        if replica:
            self._since_redundant = max(0.0, self._since_redundant - share)
        else:
            self._since_useful = max(0.0, self._since_useful - share)

    def record_failure(self, classification: Classification) -> None:
        self.failures[classification.value] += 1

    def metrics(self, now: float, *, flops_total: float) -> Metrics:
        self.advance(now)
        total = now - self.start
        per_core = flops_total / (self.cores * total) if total > 0 else 0.0
        return Metrics(**self.buckets, total_s=total, flops_total=flops_total, flops_per_core=per_core)


def compute_efficiency(run: Metrics, reference: Metrics) -> float:
    """
    Per-core FLOPS of `run` relative to the failure-free reference.

    Raises:
        ValueError: If the reference has no per-core FLOPS.
    """
    if reference.flops_per_core <= 0:
        raise ValueError(f"reference flops_per_core must be positive, got {reference.flops_per_core}")
    return run.flops_per_core / reference.flops_per_core


__all__ = ["Phase", "TimeLedger", "compute_efficiency"]
