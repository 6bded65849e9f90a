# src/ftsim/core/checkpoint.py
"""
Coordinated checkpointing.

- Scheduling: Young-Daly interval sqrt(2 * mu * C) and the application presets.
- Store: one framed record per (incarnation, seq, logical rank), plus an
  atomically replaced LATEST marker naming the newest complete wave.
- Waves: baselines (all processes, seq 0, once per incarnation) and
  incrementals (computational processes only).
- Restore: in-run rollback to the marked wave and cross-run restart with a
  different replica count.

Layout under the store root:

    <incarnation>/0/<rank>.baseline
    <incarnation>/0/<rank>.replica.baseline   (replica copy of <rank>, same wave)
    <incarnation>/<seq>/<rank>.incr
    LATEST
"""

from __future__ import annotations

import json
import logging
import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional, Protocol, Set, Tuple

from pydantic import ValidationError

from ..utils.codec import digest, frame, pack_state, unframe, unpack_state
from .errors import RestartError, StoreIOError
from .runtime import VirtualProcess
from .schemas import LatestMarker, Mode, RecordHeader, WorldDigest
from .topology import ProcessId, WorldView, build_world

log = logging.getLogger(__name__)

MARKER_NAME = "LATEST"
RecordKind = Literal["baseline", "incremental"]


# ----- Scheduling -----

def optimal_interval(mu: float, C: float) -> float:
    """
    Young-Daly checkpoint interval.

    Parameters
    ----------
    mu : float
        System MTBF in seconds.
    C : float
        Time to write one checkpoint wave in seconds.

    Returns
    -------
    float
        sqrt(2 * mu * C).

    Raises
    ------
    ValueError
        If either input is not strictly positive.
    """
    if not mu > 0 or not C > 0:
        raise ValueError(f"mu and C must be positive, got mu={mu!r} C={C!r}")
    return math.sqrt(2.0 * mu * C)


@dataclass(frozen=True)
class Preset:
    """One row of the checkpoint-interval table."""

    app: str
    cores: int
    mtbf: float
    ckpt_cost: float

    @property
    def tau(self) -> float:
        return optimal_interval(self.mtbf, self.ckpt_cost)


PRESETS: Dict[str, Tuple[Preset, ...]] = {
    "hpcg": (
        Preset("hpcg", 1024, 16000.0, 46.0),
        Preset("hpcg", 2048, 8000.0, 65.0),
        Preset("hpcg", 4096, 4000.0, 114.0),
        Preset("hpcg", 8192, 2000.0, 215.0),
    ),
    "cloverleaf": (Preset("cloverleaf", 8192, 500.0, 42.0),),
    "pic": (Preset("pic", 8192, 500.0, 60.0),),
}


def presets() -> Dict[str, Tuple[Tuple[int, float, float, float], ...]]:
    """Preset name -> ((cores, mtbf, C, tau), ...)."""
    return {
        name: tuple((p.cores, p.mtbf, p.ckpt_cost, p.tau) for p in rows)
        for name, rows in PRESETS.items()
    }


def find_preset(name: str, cores: Optional[int] = None) -> Preset:
    """
    Pick a preset row: the exact core count if given, else the largest scale.

    Raises:
        KeyError: Unknown preset name or core count.
    """
    rows = PRESETS.get(name)
    if rows is None:
        raise KeyError(f"unknown preset {name!r}; known: {sorted(PRESETS)}")
    if cores is None:
        return rows[-1]
    for row in rows:
        if row.cores == cores:
            return row
    raise KeyError(f"preset {name!r} has no row for {cores} cores; rows: {[r.cores for r in rows]}")


@dataclass(frozen=True)
class CheckpointPolicy:
    """When to checkpoint and what a wave costs."""

    mu: Optional[float]
    C: float
    tau: Optional[float]
    mode: Mode

    @classmethod
    def derive(cls, *, mu: Optional[float], C: float, mode: Mode, tau: Optional[float] = None) -> "CheckpointPolicy":
        if tau is None and mu is not None and mode in ("ckpt", "combined"):
            tau = optimal_interval(mu, C)
        return cls(mu=mu, C=C, tau=tau, mode=mode)

    @property
    def enabled(self) -> bool:
        return self.mode in ("ckpt", "combined") and self.tau is not None


# ----- Records -----

@dataclass
class CheckpointRecord:
    header: RecordHeader
    app_state: Dict[str, Any]
    runtime_state: Dict[str, Any] = field(default_factory=dict)

    def encode(self) -> bytes:
        app_bytes = pack_state(self.app_state)
        runtime_bytes = json.dumps(self.runtime_state, sort_keys=True, separators=(",", ":")).encode("utf-8")
        header = self.header.model_copy(
            update={
                "app_bytes": len(app_bytes),
                "runtime_bytes": len(runtime_bytes),
                "app_digest": digest(app_bytes),
            }
        )
        return frame(header.model_dump(), app_bytes + runtime_bytes)

    @classmethod
    def decode(cls, blob: bytes) -> "CheckpointRecord":
        """
        Raises:
            StoreIOError: On a malformed frame, header or digest mismatch.
        """
        try:
            raw_header, body = unframe(blob)
            header = RecordHeader.model_validate(raw_header)
        except (ValueError, ValidationError) as exc:
            raise StoreIOError(f"unreadable checkpoint record: {exc}") from exc
        app_bytes = body[: header.app_bytes]
        runtime_bytes = body[header.app_bytes : header.app_bytes + header.runtime_bytes]
        if digest(app_bytes) != header.app_digest:
            raise StoreIOError(
                f"digest mismatch for rank {header.logical_rank} seq {header.seq} "
                f"(incarnation {header.incarnation})"
            )
        runtime_state = json.loads(runtime_bytes.decode("utf-8")) if runtime_bytes else {}
        return cls(header, unpack_state(app_bytes), runtime_state)


def record_key(incarnation: int, seq: int, rank: int, kind: RecordKind, replica: bool = False) -> str:
    if kind == "baseline":
        suffix = "replica.baseline" if replica else "baseline"
        return f"{incarnation}/0/{rank}.{suffix}"
    return f"{incarnation}/{seq}/{rank}.incr"


_KEY_RE = re.compile(r"^(\d+)/(\d+)/(\d+)\.(baseline|replica\.baseline|incr)$")


# ----- Backends -----

class StoreBackend(Protocol):
    def write(self, key: str, data: bytes) -> None: ...
    def read(self, key: str) -> bytes: ...
    def exists(self, key: str) -> bool: ...
    def keys(self) -> List[str]: ...
    def replace_atomic(self, key: str, data: bytes) -> None: ...


class MemoryBackend:
    """Dict-backed store used by campaigns and most tests."""

    def __init__(self) -> None:
        self.blobs: Dict[str, bytes] = {}

    def write(self, key: str, data: bytes) -> None:
        self.blobs[key] = bytes(data)

    def read(self, key: str) -> bytes:
        try:
            return self.blobs[key]
        except KeyError as exc:
            raise StoreIOError(f"missing store key {key!r}") from exc

    def exists(self, key: str) -> bool:
        return key in self.blobs

    def keys(self) -> List[str]:
        return sorted(self.blobs)

    def replace_atomic(self, key: str, data: bytes) -> None:
        self.blobs[key] = bytes(data)


class DirectoryBackend:
    """Files under `root`; the marker is replaced via a temp file and os.replace."""

    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)

    def _path(self, key: str) -> Path:
        return self.root / key

    def write(self, key: str, data: bytes) -> None:
        path = self._path(key)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(data)
        except OSError as exc:
            raise StoreIOError(f"cannot write {path}: {exc}") from exc

    def read(self, key: str) -> bytes:
        path = self._path(key)
        try:
            return path.read_bytes()
        except OSError as exc:
            raise StoreIOError(f"cannot read {path}: {exc}") from exc

    def exists(self, key: str) -> bool:
        return self._path(key).is_file()

    def keys(self) -> List[str]:
        if not self.root.is_dir():
            return []
        return sorted(
            p.relative_to(self.root).as_posix()
            for p in self.root.rglob("*")
            if p.is_file() and not p.name.endswith(".tmp")
        )

    def replace_atomic(self, key: str, data: bytes) -> None:
        path = self._path(key)
        tmp = path.with_name(path.name + ".tmp")
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp.write_bytes(data)
            os.replace(tmp, path)
        except OSError as exc:
            raise StoreIOError(f"cannot commit {path}: {exc}") from exc


class CheckpointStore:
    """Record layout and marker logic on top of a backend."""

    def __init__(self, backend: Optional[StoreBackend] = None) -> None:
        self.backend: StoreBackend = backend if backend is not None else MemoryBackend()

    @classmethod
    def at(cls, root: str | Path) -> "CheckpointStore":
        return cls(DirectoryBackend(root))

    # ----- records -----

    def write_record(self, record: CheckpointRecord) -> str:
        h = record.header
        key = record_key(h.incarnation, h.seq, h.logical_rank, h.kind, h.replica)
        self.backend.write(key, record.encode())
        return key

    def read_record(
        self, incarnation: int, seq: int, rank: int, kind: RecordKind = "incremental", replica: bool = False
    ) -> CheckpointRecord:
        return CheckpointRecord.decode(self.backend.read(record_key(incarnation, seq, rank, kind, replica)))

    def has_record(self, incarnation: int, seq: int, rank: int, kind: RecordKind = "incremental") -> bool:
        return self.backend.exists(record_key(incarnation, seq, rank, kind))

    def wave_complete(self, incarnation: int, seq: int, nC: int) -> bool:
        return all(self.has_record(incarnation, seq, r) for r in range(nC))

    def incarnations(self) -> List[int]:
        found: Set[int] = set()
        for key in self.backend.keys():
            m = _KEY_RE.match(key)
            if m:
                found.add(int(m.group(1)))
        return sorted(found)

    def baseline_count(self, incarnation: int) -> int:
        prefix = f"{incarnation}/0/"
        return sum(1 for k in self.backend.keys() if k.startswith(prefix) and k.endswith("baseline"))

    # ----- marker -----

    def latest(self) -> Optional[LatestMarker]:
        if not self.backend.exists(MARKER_NAME):
            return None
        raw = self.backend.read(MARKER_NAME)
        try:
            return LatestMarker.model_validate_json(raw)
        except ValidationError as exc:
            raise StoreIOError(f"corrupt {MARKER_NAME} marker: {exc}") from exc

    def commit(self, marker: LatestMarker) -> None:
        """
        Point LATEST at a wave.

        Raises:
            StoreIOError: If any computational record of the wave is missing.
        """
        if marker.seq > 0 and not self.wave_complete(marker.incarnation, marker.seq, marker.nC):
            raise StoreIOError(f"refusing to commit incomplete wave {marker.incarnation}/{marker.seq}")
        self.backend.replace_atomic(MARKER_NAME, marker.model_dump_json().encode("utf-8"))
        log.info("wave committed incarnation=%d seq=%d nC=%d", marker.incarnation, marker.seq, marker.nC)

    def load_wave(self, marker: LatestMarker) -> Dict[int, CheckpointRecord]:
        """Records of the marked wave by logical rank."""
        if not self.wave_complete(marker.incarnation, marker.seq, marker.nC):
            raise RestartError(f"wave {marker.incarnation}/{marker.seq} is incomplete")
        return {r: self.read_record(marker.incarnation, marker.seq, r) for r in range(marker.nC)}


# ----- Waves -----

def _world_digest(world: WorldView) -> WorldDigest:
    return WorldDigest(N=world.nC, M=world.nR, epoch=world.epoch)


def make_record(
    vp: VirtualProcess,
    world: WorldView,
    *,
    incarnation: int,
    seq: int,
    kind: RecordKind,
    replica: bool = False,
) -> CheckpointRecord:
    """Snapshot one process at its current step boundary."""
    header = RecordHeader(
        logical_rank=vp.rank,
        incarnation=incarnation,
        kind=kind,
        seq=seq,
        step=vp.step,
        replica=replica,
        world=_world_digest(world),
        app_bytes=0,
        runtime_bytes=0,
        app_digest="",
    )
    # pack/unpack detaches the snapshot from the live arrays
    return CheckpointRecord(header, unpack_state(pack_state(vp.app_state)), vp.runtime.snapshot_state())


def write_baseline(
    store: CheckpointStore,
    world: WorldView,
    processes: Mapping[ProcessId, VirtualProcess],
    *,
    incarnation: int,
) -> int:
    """
    Every live process, computational and replica, writes its baseline.

    Computational copies write `<inc>/0/<rank>.baseline`; replicas write
    `<inc>/0/<rank>.replica.baseline` beside it, so the store holds one
    baseline per process. Returns the number of records written (N + M).
    """
    written = 0
    for uid in world.world:
        role = world.role_of(uid)
        store.write_record(
            make_record(processes[uid], world, incarnation=incarnation, seq=0, kind="baseline", replica=role.is_replica)
        )
        written += 1
    log.debug("baseline written incarnation=%d records=%d", incarnation, written)
    return written


def snapshot_wave(
    world: WorldView,
    processes: Mapping[ProcessId, VirtualProcess],
    *,
    incarnation: int,
    seq: int,
) -> List[CheckpointRecord]:
    """Incremental records of every computational process, in rank order."""
    return [
        make_record(processes[uid], world, incarnation=incarnation, seq=seq, kind="incremental")
        for uid in world.cmp_group
    ]


def write_incremental(
    store: CheckpointStore,
    world: WorldView,
    processes: Mapping[ProcessId, VirtualProcess],
    *,
    incarnation: int,
    seq: int,
) -> LatestMarker:
    """Write a whole wave at once and commit it; replicas write nothing."""
    for record in snapshot_wave(world, processes, incarnation=incarnation, seq=seq):
        store.write_record(record)
    marker = LatestMarker(incarnation=incarnation, seq=seq, nC=world.nC)
    store.commit(marker)
    return marker


# ----- Quiesce -----

@dataclass
class QuiesceToken:
    """
    An in-progress quiesce: every member must park at `target_step`.

    The target is fixed when the request arrives: one past the furthest
    process, so nobody has already passed it.
    """

    seq: int
    target_step: int
    requested_at: float
    members: Set[ProcessId]
    parked: Set[ProcessId] = field(default_factory=set)
    granted_at: Optional[float] = None

    @property
    def ready(self) -> bool:
        return self.members <= self.parked

    def park(self, uid: ProcessId, step: int) -> bool:
        """True if `uid` must stop here."""
        if step != self.target_step or uid not in self.members:
            return False
        self.parked.add(uid)
        return True

    def discard(self, uid: ProcessId) -> None:
        self.members.discard(uid)
        self.parked.discard(uid)


def quiesce(
    world: WorldView,
    processes: Mapping[ProcessId, VirtualProcess],
    *,
    seq: int,
    now: float,
    total_steps: int,
) -> Optional[QuiesceToken]:
    """
    Start a quiesce for wave `seq`; None if the job is too close to its end.

    Processes keep running until their next boundary at the target step.
    """
    live = [processes[uid] for uid in world.world]
    if any(vp.done for vp in live):
        log.warning("checkpoint request skipped seq=%d: some process already finished", seq)
        return None
    target = max(vp.step for vp in live) + 1
    if target >= total_steps:
        log.warning("checkpoint request skipped seq=%d: target step %d at job end", seq, target)
        return None
    return QuiesceToken(seq=seq, target_step=target, requested_at=now, members=set(world.world))


# ----- Restore -----

def rollback_restore(
    store: CheckpointStore,
    world: WorldView,
    *,
    incarnation: int,
) -> Dict[ProcessId, CheckpointRecord]:
    """
    Records every live process of `world` restores from.

    Computational and replica copies of rank r both load rank r's record of
    the marked wave; with no marker, each process reloads the baseline of
    the current incarnation (respawned processes use the computational one).
    """
    marker = store.latest()
    out: Dict[ProcessId, CheckpointRecord] = {}
    if marker is not None:
        wave = store.load_wave(marker)
        for uid in world.world:
            out[uid] = wave[world.role_of(uid).logical_rank]
        return out
    for uid in world.world:
        role = world.role_of(uid)
        replica = role.is_replica and store.backend.exists(
            record_key(incarnation, 0, role.logical_rank, "baseline", replica=True)
        )
        out[uid] = store.read_record(incarnation, 0, role.logical_rank, "baseline", replica=replica)
    return out


@dataclass
class RestartPlan:
    incarnation: int
    world: WorldView
    marker: LatestMarker
    records: Dict[int, CheckpointRecord]


def restart_job(store: CheckpointStore, new_N: int, new_M: int, *, uid_start: int = 0) -> RestartPlan:
    """
    Prepare a new incarnation from the newest complete wave.

    The logical width is fixed; the replica count may differ from the run
    that wrote the store.

    Raises:
        RestartError: No marker, an incomplete wave, or a width mismatch.
    """
    marker = store.latest()
    if marker is None:
        raise RestartError("store holds no committed checkpoint wave")
    if new_N != marker.nC:
        raise RestartError(f"restart width N={new_N} differs from checkpoint width {marker.nC}")
    if not 0 <= new_M <= new_N:
        raise RestartError(f"replica count M={new_M} must lie in [0, {new_N}]")
    records = store.load_wave(marker)
    incarnation = max(store.incarnations(), default=-1) + 1
    world = build_world(new_N, new_M, list(range(uid_start, uid_start + new_N + new_M)))
    log.info(
        "job restart incarnation=%d from=%d/%d N=%d M=%d",
        incarnation, marker.incarnation, marker.seq, new_N, new_M,
    )
    return RestartPlan(incarnation, world, marker, records)


def records_for(plan: RestartPlan) -> Dict[ProcessId, CheckpointRecord]:
    """Both copies of rank r read rank r's record."""
    return {uid: plan.records[plan.world.role_of(uid).logical_rank] for uid in plan.world.world}


__all__ = [
    "MARKER_NAME",
    "optimal_interval",
    "Preset",
    "PRESETS",
    "presets",
    "find_preset",
    "CheckpointPolicy",
    "CheckpointRecord",
    "record_key",
    "MemoryBackend",
    "DirectoryBackend",
    "CheckpointStore",
    "make_record",
    "write_baseline",
    "snapshot_wave",
    "write_incremental",
    "QuiesceToken",
    "quiesce",
    "rollback_restore",
    "RestartPlan",
    "restart_job",
    "records_for",
]
