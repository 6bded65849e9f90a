# src/ftsim/core/failure.py
"""
Failure injection, world repair and message recovery.

Injection draws Weibull inter-arrival gaps whose mean equals the system MTBF
and picks victims uniformly among live processes when each event fires.

Repair drains the wire, classifies every failed process, shrinks the world
and promotes replicas. Recovery then reconciles point-to-point channels
(resend what a receiver never got, skip what it got from a copy whose
successor never sent it) and replays collectives past the global frontier.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Iterator, List, Mapping, Optional, Protocol, Sequence, Set, Tuple

import numpy as np
from scipy.special import gamma

from . import settings
from .errors import ConfigError
from .runtime import Runtime
from .simnet import NativeTransport
from .topology import ProcessId, WorldView, lost_ranks, shrink

log = logging.getLogger(__name__)


class Classification(str, Enum):
    REPLICA_DEATH = "replica-death"
    PROMOTED = "computational-death-promoted"
    UNRECOVERABLE = "unrecoverable"


# =============================================================================
# Failure model
# =============================================================================

@dataclass(frozen=True)
class FailureModel:
    """
    Weibull failure process for a machine of `core_count` cores.

    The system MTBF is the per-core MTBF divided by the core count; the
    Weibull scale is calibrated so the mean gap equals the system MTBF.
    """

    per_core_mtbf: float
    core_count: int
    shape: float = settings.WEIBULL_SHAPE
    seed: int = 0

    def __post_init__(self) -> None:
        if self.per_core_mtbf <= 0 or self.core_count <= 0 or self.shape <= 0:
            raise ValueError(
                f"invalid failure model mtbf={self.per_core_mtbf} cores={self.core_count} shape={self.shape}"
            )

    @classmethod
    def from_system(cls, system_mtbf: float, core_count: int, **kwargs) -> "FailureModel":
        return cls(per_core_mtbf=system_mtbf * core_count, core_count=core_count, **kwargs)

    @property
    def system_mtbf(self) -> float:
        return self.per_core_mtbf / self.core_count

    @property
    def scale(self) -> float:
        return self.system_mtbf / gamma(1.0 + 1.0 / self.shape)

    def events(self) -> Iterator["FailureEvent"]:
        """
        Endless event stream: per event one gap draw, then one victim selector.

        Gaps are unit Weibull draws times the scale, so two models differing
        only in MTBF see the same random numbers.
        """
        rng = np.random.default_rng(self.seed)
        t = 0.0
        while True:
            t += float(rng.weibull(self.shape)) * self.scale
            yield FailureEvent(time=t, selector=float(rng.random()))


@dataclass
class FailureEvent:
    time: float
    selector: float
    victim: Optional[ProcessId] = None
    detected_at: Optional[float] = None
    classification: Optional[Classification] = None


def sample_failure_schedule(model: FailureModel, horizon: float) -> List[FailureEvent]:
    """All events of `model` up to `horizon`, victims still unresolved."""
    if horizon <= 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    out: List[FailureEvent] = []
    for ev in model.events():
        if ev.time > horizon:
            break
        out.append(ev)
    return out


def load_failure_schedule(path: str | Path) -> List[FailureEvent]:
    """
    Parse `time_seconds victim_selector` lines; `#` starts a comment line.

    Raises:
        ConfigError: On unreadable files, malformed lines, negative times or
            selectors outside [0, 1).
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read failure schedule {path}: {exc}") from exc
    events: List[FailureEvent] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        try:
            t, sel = float(parts[0]), float(parts[1])
        except (IndexError, ValueError) as exc:
            raise ConfigError(f"{path}:{lineno}: expected 'time selector', got {line!r}") from exc
        if t < 0 or not 0.0 <= sel < 1.0:
            raise ConfigError(f"{path}:{lineno}: time must be >= 0 and selector in [0, 1), got {line!r}")
        events.append(FailureEvent(time=t, selector=sel))
    events.sort(key=lambda e: e.time)
    return events


class FailureInjector:
    """Feeds events one at a time; victims are resolved when an event fires."""

    def __init__(self, source: Iterator[FailureEvent] | Sequence[FailureEvent]) -> None:
        self._it = iter(source)
        self.fired: List[FailureEvent] = []

    def next_event(self) -> Optional[FailureEvent]:
        return next(self._it, None)

    def pick_victim(self, event: FailureEvent, live: Sequence[ProcessId]) -> Optional[ProcessId]:
        if not live:
            return None
        ordered = sorted(live)
        event.victim = ordered[int(event.selector * len(ordered))]
        self.fired.append(event)
        return event.victim


# =============================================================================
# Repair
# =============================================================================

@dataclass
class RepairOutcome:
    """Result of one repair; `world` is None when some rank lost every copy."""

    before: WorldView
    world: Optional[WorldView]
    classifications: Dict[ProcessId, Classification]
    lost: Tuple[int, ...] = ()
    drained: int = 0

    @property
    def recoverable(self) -> bool:
        return self.world is not None


def classify(world: WorldView, failed: Set[ProcessId]) -> Dict[ProcessId, Classification]:
    lost = set(lost_ranks(world, failed))
    out: Dict[ProcessId, Classification] = {}
    for uid in sorted(failed):
        role = world.role_of(uid)
        if role is None:
            continue
        if role.logical_rank in lost:
            out[uid] = Classification.UNRECOVERABLE
        elif role.is_replica:
            out[uid] = Classification.REPLICA_DEATH
        else:
            out[uid] = Classification.PROMOTED
    return out


def repair_world(
    world: WorldView,
    failed: Set[ProcessId],
    *,
    runtimes: Optional[Mapping[ProcessId, Runtime]] = None,
    transport: Optional[NativeTransport] = None,
) -> RepairOutcome:
    """
    Drain in-flight traffic, classify the failures and shrink.

    With `transport` and `runtimes`, the wire is flushed into the mailboxes
    and every surviving process drains its mailbox into drained chunks
    first, whatever it was doing.
    """
    failed = {uid for uid in failed if world.contains(uid)}
    drained = 0
    if transport is not None:
        transport.flush(deliver=True)
    if runtimes is not None:
        for uid in world.world:
            if uid not in failed and uid in runtimes:
                drained += len(runtimes[uid].drain_inflight())

    classes = classify(world, failed)
    lost = lost_ranks(world, failed)
    if lost:
        log.warning("repair impossible epoch=%d lost_ranks=%s", world.epoch, list(lost))
        return RepairOutcome(world, None, classes, lost, drained)
    new = shrink(world, failed)
    log.debug(
        "repair epoch=%d failed=%s promoted=%s drained=%d",
        new.epoch,
        sorted(failed),
        sorted(u for u, c in classes.items() if c is Classification.PROMOTED),
        drained,
    )
    return RepairOutcome(world, new, classes, (), drained)


# =============================================================================
# Message recovery
# =============================================================================

@dataclass
class RecoveryLedger:
    """What one recovery pass exchanged and decided."""

    received_upto: Dict[Tuple[ProcessId, int], int] = field(default_factory=dict)
    skip: Dict[Tuple[ProcessId, int], Set[int]] = field(default_factory=dict)
    resent: Dict[Tuple[ProcessId, int], List[int]] = field(default_factory=dict)
    heads: Dict[Tuple[ProcessId, int], int] = field(default_factory=dict)
    frontier: int = 0
    replayed: List[Tuple[ProcessId, int]] = field(default_factory=list)
    reposted: List[Tuple[ProcessId, int]] = field(default_factory=list)
    bytes: int = 0

    def check(self) -> None:
        """
        Raises:
            AssertionError: If a channel's sender lags its receiver after
                skipping, or an id was both resent and skipped.
        """
        for key, ids in self.resent.items():
            overlap = set(ids) & self.skip.get(key, set())
            assert not overlap, f"channel {key}: ids {sorted(overlap)} both resent and skipped"
        for key, upto in self.received_upto.items():
            head = self.heads.get(key, 0)
            skipped = self.skip.get(key, set())
            assert head >= upto or all(x in skipped for x in range(head + 1, upto + 1)), (
                f"channel {key}: sender head {head} behind receiver {upto} without skips"
            )

    @property
    def is_noop(self) -> bool:
        return not any(self.resent.values()) and not any(self.skip.values()) and not self.replayed


def recover_messages(world: WorldView, runtimes: Mapping[ProcessId, Runtime]) -> RecoveryLedger:
    """
    Reconcile point-to-point channels, then collectives, on a repaired world.

    Phase 1 gathers per-channel received ids (consumed plus drained). Phase 2
    has each channel's responsible sender resend what the receiver lacks and
    gives the receiver a fresh skip set of ids it already holds beyond the
    sender's log head. Phase 3 replays every collective past the frontier
    from the logs of processes that completed it and re-posts pending ones.

    Raises:
        LogGapError: If a needed entry was trimmed.
    """
    ledger = RecoveryLedger()
    live = [uid for uid in world.world if uid in runtimes]

    # phase 1
    received: Dict[Tuple[ProcessId, int], Tuple[object, Set[int]]] = {}
    for uid in live:
        rt = runtimes[uid]
        rt.skip = {}
        for src in range(world.nC):
            consumed, held = rt.received_ids(src)
            received[(uid, src)] = (consumed, held)
            ledger.received_upto[(uid, src)] = max(consumed.top(), max(held, default=0))

    # phase 2
    for uid in live:
        rt = runtimes[uid]
        rank = rt.rank
        for src in range(world.nC):
            consumed, held = received[(uid, src)]
            sender = runtimes[world.responsible_sender(src, uid)]
            head = sender.log_head(rank)
            ledger.heads[(uid, src)] = head
            missing = [x for x in range(consumed.floor + 1, head + 1) if x not in consumed and x not in held]
            if missing:
                ledger.bytes += sender.resend(rank, missing, uid)
                ledger.resent[(uid, src)] = missing
            skip = consumed.ids_above(head) | {x for x in held if x > head}
            if skip:
                rt.skip[src] = skip
                ledger.skip[(uid, src)] = skip

    # phase 3
    ledger.frontier = min((runtimes[u].completed_upto for u in live), default=0)
    top = max((runtimes[u].max_completed() for u in live), default=0)
    for seq in range(ledger.frontier + 1, top + 1):
        for uid in live:
            rt = runtimes[uid]
            if rt.collective_completed(seq):
                rt.repost_logged(seq)
                ledger.bytes += rt.coll_log[seq].nbytes
                ledger.replayed.append((uid, seq))
    for uid in live:
        rt = runtimes[uid]
        for seq in sorted(rt.pending_colls):
            rt.repost_pending(seq)
            ledger.reposted.append((uid, seq))

    log.debug(
        "recovery epoch=%d resent=%d skipped=%d frontier=%d replayed=%d reposted=%d",
        world.epoch,
        sum(len(v) for v in ledger.resent.values()),
        sum(len(v) for v in ledger.skip.values()),
        ledger.frontier,
        len(ledger.replayed),
        len(ledger.reposted),
    )
    return ledger


# =============================================================================
# Accounting
# =============================================================================

class FailureLedger(Protocol):
    def record_failure(self, classification: Classification) -> None: ...
    def regress(self) -> float: ...


def classify_and_account(
    event: FailureEvent,
    classification: Classification,
    ledger: FailureLedger,
    *,
    rollback: bool = False,
) -> float:
    """
    Fix the event's classification and charge it.

    Repair time itself is charged by the phase the job is in while it
    repairs. A rollback additionally moves the application time since the
    last committed wave into the rollback bucket; that amount is returned.
    """
    event.classification = classification
    ledger.record_failure(classification)
    return ledger.regress() if rollback else 0.0


__all__ = [
    "Classification",
    "FailureModel",
    "FailureEvent",
    "sample_failure_schedule",
    "load_failure_schedule",
    "FailureInjector",
    "RepairOutcome",
    "classify",
    "repair_world",
    "RecoveryLedger",
    "recover_messages",
    "classify_and_account",
]
