# src/ftsim/core/schemas.py
from __future__ import annotations

"""
Typed data models shared across ftsim.

These Pydantic schemas define the contract between:
- config files / CLI flags and the simulator (SimConfig, CampaignConfig, SweepConfig),
- the checkpoint store and its readers (RecordHeader, LatestMarker),
- a finished run and the report layer (Metrics, DeliveryAudit, RunRecord, CampaignReport).

Every config field defaults to the matching constant in ftsim.core.settings, so
an empty JSON object is a valid SimConfig.
"""

from pathlib import Path
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, Field, model_validator

from . import settings

Mode = Literal["plain", "ckpt", "repl", "combined"]
AppName = Literal["stencil_halo", "cg_like", "particle_like"]


# ----- Simulation substrate -----

class SimConfig(BaseModel):
    """
    Cost-model and layout constants for one simulation instance.

    Attributes:
        latency_base_s: Fixed per-message latency (seconds).
        latency_per_byte_s: Additional latency per payload byte (seconds).
        cores_per_node: Virtual processes per node (one coordinator per node).
        coord_groups: Coordinator groups; 0 means round(sqrt(#nodes)).
        coord_hop_s: Latency of one inter-coordinator hop.
        state_bytes: Nominal per-rank memory footprint written by a checkpoint.
        ckpt_bandwidth: Aggregate store bandwidth (bytes/s).
        weibull_shape: Shape of the failure inter-arrival distribution.
        comm_create_s: Cost of recreating one communicator during repair.
        log_trim_bytes: Per-process message-log size that triggers a trim.
        trim_bandwidth: Local bandwidth used to charge log trims (bytes/s).
        seed: Root seed for failure sampling.
        trace: Dump the dispatched-event stream as NDJSON.
    """

    latency_base_s: float = Field(settings.LATENCY_BASE_S, ge=0, description="Base message latency (s).")
    latency_per_byte_s: float = Field(settings.LATENCY_PER_BYTE_S, ge=0, description="Per-byte latency (s).")
    cores_per_node: int = Field(settings.CORES_PER_NODE, ge=1, description="Processes per node.")
    coord_groups: int = Field(settings.COORD_GROUPS, ge=0, description="Coordinator groups (0 = sqrt).")
    coord_hop_s: float = Field(settings.COORD_HOP_S, ge=0, description="Inter-coordinator hop latency (s).")
    state_bytes: int = Field(settings.STATE_BYTES, ge=0, description="Nominal state per rank (bytes).")
    ckpt_bandwidth: float = Field(settings.CKPT_BANDWIDTH, gt=0, description="Store bandwidth (bytes/s).")
    weibull_shape: float = Field(settings.WEIBULL_SHAPE, gt=0, description="Weibull shape parameter.")
    comm_create_s: float = Field(settings.COMM_CREATE_S, ge=0, description="Per-communicator rebuild cost (s).")
    log_trim_bytes: int = Field(settings.LOG_TRIM_BYTES, ge=0, description="Log size that triggers a trim.")
    trim_bandwidth: float = Field(settings.TRIM_BANDWIDTH, gt=0, description="Log trim bandwidth (bytes/s).")
    seed: int = Field(settings.SEED, description="Root seed.")
    trace: bool = Field(False, description="Write trace.ndjson next to the results.")

    @classmethod
    def from_file(cls, path: str | Path) -> "SimConfig":
        return cls.model_validate_json(Path(path).read_text(encoding="utf-8"))


# ----- Campaigns -----

class CampaignConfig(BaseModel):
    """
    One campaign point: an app at one scale and mode, repeated over seeds.

    `replication` is the fraction of all cores running replicas, so 0.5 is
    dual redundancy. `replicas` overrides it with an exact count.
    `mtbf` is the system MTBF at `cores` (None disables failures).
    """

    app: AppName = Field("stencil_halo", description="Mini-app to run.")
    cores: int = Field(..., ge=1, description="Total processes (N + M).")
    replication: float = Field(0.0, ge=0.0, le=1.0, description="Fraction of cores used for replicas.")
    replicas: Optional[int] = Field(None, ge=0, description="Exact replica count (overrides replication).")
    mode: Mode = Field("ckpt", description="Fault-tolerance mode.")
    mtbf: Optional[float] = Field(None, gt=0, description="System MTBF in seconds; None = no failures.")
    ckpt_cost: Optional[float] = Field(None, gt=0, description="Checkpoint creation time C (s) at this scale.")
    tau: Optional[float] = Field(None, gt=0, description="Explicit checkpoint interval (s).")
    preset: Optional[str] = Field(None, description="Name of a preset filling mtbf/ckpt_cost.")
    seeds: List[int] = Field(default_factory=lambda: [0], description="Seeds to repeat the point over.")
    seconds_per_step: float = Field(60.0, gt=0, description="Simulated compute time per step and rank.")
    target_time: float = Field(3 * 3600.0, gt=0, description="Failure-free execution target (s).")
    steps: Optional[int] = Field(None, ge=1, description="Explicit step count (overrides target_time).")
    time_scale: float = Field(1.0, gt=0, description="Scales target_time and MTBF together.")
    cells_per_rank: int = Field(16, ge=2, description="Local problem size per rank.")
    schedule: Optional[str] = Field(None, description="Failure schedule file replacing sampled failures.")
    label: Optional[str] = Field(None, description="Free-form point label for reports.")
    sim: SimConfig = Field(default_factory=SimConfig, description="Simulation constants.")

    @model_validator(mode="after")
    def _check_layout(self) -> "CampaignConfig":
        M = self.n_replicas
        N = self.cores - M
        if M > N:
            raise ValueError(f"replica count M={M} exceeds computational count N={N}")
        if self.mode in ("plain", "ckpt") and M:
            raise ValueError(f"mode={self.mode} runs without replicas, got M={M}")
        return self

    @property
    def n_replicas(self) -> int:
        if self.replicas is not None:
            return self.replicas
        return int(round(self.replication * self.cores))

    @property
    def n_ranks(self) -> int:
        return self.cores - self.n_replicas

    @property
    def total_steps(self) -> int:
        if self.steps is not None:
            return self.steps
        return max(1, int(round(self.target_time * self.time_scale / self.seconds_per_step)))

    @property
    def effective_mtbf(self) -> Optional[float]:
        return None if self.mtbf is None else self.mtbf * self.time_scale

    @property
    def per_core_mtbf(self) -> Optional[float]:
        return None if self.mtbf is None else self.mtbf * self.cores

    @classmethod
    def from_file(cls, path: str | Path) -> "CampaignConfig":
        return cls.model_validate_json(Path(path).read_text(encoding="utf-8"))


class SweepConfig(BaseModel):
    """
    A list of campaign points plus the efficiency reference.

    The reference defaults to the smallest point, run failure-free in plain mode.
    """

    name: str = Field("sweep", description="Sweep name used for output folders.")
    points: List[CampaignConfig] = Field(..., min_length=1, description="Campaign points.")
    reference: Optional[CampaignConfig] = Field(None, description="Efficiency reference point.")

    @classmethod
    def from_file(cls, path: str | Path) -> "SweepConfig":
        return cls.model_validate_json(Path(path).read_text(encoding="utf-8"))


# ----- Checkpoint store -----

class WorldDigest(BaseModel):
    N: int = Field(..., description="Logical width.")
    M: int = Field(..., description="Live replicas when the record was written.")
    epoch: int = Field(..., description="World epoch when the record was written.")


class RecordHeader(BaseModel):
    """JSON header of one checkpoint record."""

    logical_rank: int = Field(..., ge=0)
    incarnation: int = Field(..., ge=0)
    kind: Literal["baseline", "incremental"]
    seq: int = Field(..., ge=0)
    step: int = Field(..., ge=0, description="Completed application steps.")
    replica: bool = Field(False, description="Written by a replica (baselines only).")
    world: WorldDigest
    app_bytes: int = Field(..., ge=0)
    runtime_bytes: int = Field(..., ge=0)
    app_digest: str = Field(..., description="sha256 of the serialized application state.")


class LatestMarker(BaseModel):
    """Content of store/LATEST: the newest complete wave."""

    incarnation: int = Field(..., ge=0)
    seq: int = Field(..., ge=0)
    nC: int = Field(..., ge=1)


# ----- Results -----

class Metrics(BaseModel):
    """
    Core-averaged time distribution and performance of one run.

    useful + redundant + create + restore + rollback + log_removal + idle = total.
    """

    useful_work_s: float = 0.0
    redundant_work_s: float = 0.0
    checkpoint_create_s: float = 0.0
    restore_s: float = 0.0
    rollback_s: float = 0.0
    log_removal_s: float = 0.0
    idle_s: float = 0.0
    total_s: float = 0.0
    flops_total: float = 0.0
    flops_per_core: float = 0.0
    efficiency: Optional[float] = None

    def bucket_sum(self) -> float:
        return (
            self.useful_work_s
            + self.redundant_work_s
            + self.checkpoint_create_s
            + self.restore_s
            + self.rollback_s
            + self.log_removal_s
            + self.idle_s
        )


class DeliveryAudit(BaseModel):
    """Exactly-once check over every live logical channel."""

    channels: int = 0
    lost: int = 0
    duplicated: int = 0
    suppressed: int = 0

    @property
    def ok(self) -> bool:
        return self.lost == 0 and self.duplicated == 0


class RunRecord(BaseModel):
    """One (point, seed) row of a campaign."""

    label: Optional[str] = None
    app: str
    cores: int
    N: int
    M: int
    mode: Mode
    mtbf: Optional[float] = None
    ckpt_cost: float
    tau: Optional[float] = None
    seed: int
    steps: int
    aborted: bool = False
    checksum: str = ""
    trace_hash: str = ""
    failures: int = 0
    repairs: int = 0
    rollbacks: int = 0
    restarts: int = 0
    waves: int = 0
    events: int = 0
    audit: DeliveryAudit = Field(default_factory=DeliveryAudit)
    metrics: Metrics = Field(default_factory=Metrics)


class CampaignReport(BaseModel):
    """Everything `ftsim report` needs: raw runs plus the reference metrics."""

    name: str = "campaign"
    reference: Optional[Metrics] = None
    runs: List[RunRecord] = Field(default_factory=list)
    constants: Dict[str, float] = Field(default_factory=dict, description="Cost-model constants used.")


__all__ = [
    "Mode",
    "AppName",
    "SimConfig",
    "CampaignConfig",
    "SweepConfig",
    "WorldDigest",
    "RecordHeader",
    "LatestMarker",
    "Metrics",
    "DeliveryAudit",
    "RunRecord",
    "CampaignReport",
]
