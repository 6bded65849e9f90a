# src/ftsim/core/runtime.py
"""
Application-facing message passing on top of the native transport.

Every virtual process owns one Runtime. It maps logical ranks to the current
WorldView (computational and replica sides), logs every logical send with a
per-channel send-id, logs every collective, drains the wire on demand and
tracks which send-ids it has consumed so recovery can resend or skip.

Only non-blocking native primitives are used: isend, irecv, test, iprobe,
the probe-guaranteed receive and group-op posts. `wait` is a generator that
polls `test` and yields BLOCKED between polls, so a process can always be
interrupted by checkpoint or failure handling.

A virtual process is explicit state (VirtualProcess) interpreted by `drive`;
the generator can be rebuilt from that state at any time.
"""

from __future__ import annotations

import copy
import functools
import hashlib
import json
import logging
import operator
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, Iterator, List, Optional, Protocol, Sequence, Set, Tuple, Union

import numpy as np

from ..utils.codec import payload_nbytes
from .errors import LogGapError, RoutingError
from .simnet import Envelope, NativeTransport, TransportRequest
from .topology import Role, WorldView

log = logging.getLogger(__name__)


class ChannelKind(str, Enum):
    P2P = "p2p"
    COLLECTIVE = "collective"


COLLECTIVE_KINDS = ("allgather", "allreduce", "bcast", "barrier", "gather", "scatter", "alltoall")

REDUCE_OPS: Dict[str, Callable[[Any, Any], Any]] = {
    "sum": operator.add,
    "prod": operator.mul,
    "max": np.maximum,
    "min": np.minimum,
}


# ----- Bookkeeping records -----

@dataclass
class IdSet:
    """Consumed send-ids of one channel: everything <= floor, plus extras."""

    floor: int = 0
    extras: Set[int] = field(default_factory=set)

    def __contains__(self, x: int) -> bool:
        return x <= self.floor or x in self.extras

    def add(self, x: int) -> bool:
        if x in self:
            return False
        self.extras.add(x)
        while self.floor + 1 in self.extras:
            self.floor += 1
            self.extras.remove(self.floor)
        return True

    def ids_above(self, head: int) -> Set[int]:
        out = set(range(head + 1, self.floor + 1))
        out.update(x for x in self.extras if x > head)
        return out

    def top(self) -> int:
        return max(self.floor, max(self.extras, default=0))


@dataclass
class SendLogEntry:
    send_id: int
    dest_rank: int
    tag: int
    payload: Any
    nbytes: int
    timestamp: float


@dataclass
class CollectiveLogEntry:
    seq: int
    kind: str
    params: Dict[str, Any]
    digest: str
    contribution: Any
    nbytes: int
    timestamp: float
    result: Any = None
    completed: bool = False


@dataclass
class DrainedChunk:
    src_uid: int
    src_rank: int
    send_id: int
    tag: int
    payload: Any
    epoch: int
    matched: bool = False


@dataclass
class RequestHandle:
    """
    Composite request: one computational-side and one replica-side native
    request plus inter-group extras. Complete iff every non-null part is.
    """

    handle_id: int
    kind: str
    peer: Optional[int] = None
    tag: Optional[int] = None
    coll_seq: Optional[int] = None
    cmp_subreq: Optional[TransportRequest] = None
    rep_subreq: Optional[TransportRequest] = None
    extra_subreqs: List[TransportRequest] = field(default_factory=list)
    completed: bool = False
    result: Any = None

    def subrequests(self) -> List[TransportRequest]:
        return [r for r in (self.cmp_subreq, self.rep_subreq, *self.extra_subreqs) if r is not None]


def collective_digest(kind: str, params: Dict[str, Any]) -> str:
    raw = json.dumps({"kind": kind, "params": params}, sort_keys=True, default=str)
    return hashlib.sha256(raw.encode("utf-8")).hexdigest()


def combine(kind: str, params: Dict[str, Any], contributions: Sequence[Any], rank: int) -> Any:
    """Local result of a collective from contributions listed in logical-rank order."""
    if kind == "allgather":
        return list(contributions)
    if kind == "allreduce":
        return functools.reduce(REDUCE_OPS[params.get("op", "sum")], contributions)
    if kind == "bcast":
        return contributions[params["root"]]
    if kind == "barrier":
        return None
    if kind == "gather":
        return list(contributions) if rank == params["root"] else None
    if kind == "scatter":
        return contributions[params["root"]][rank]
    if kind == "alltoall":
        return [c[rank] for c in contributions]
    raise ValueError(f"unknown collective kind {kind!r}")


# =============================================================================
# Runtime
# =============================================================================

class Runtime:
    """Per-process replica-aware communication state."""

    def __init__(
        self,
        uid: int,
        world: WorldView,
        net: NativeTransport,
        *,
        log_trim_bytes: int = 64 * 2**20,
    ) -> None:
        self.uid = uid
        self.world = world
        self.net = net
        self.log_trim_bytes = log_trim_bytes
        self.stats: Counter[str] = Counter()
        self._handles = 0
        self._reset()

    def _reset(self) -> None:
        self.send_counters: Dict[int, int] = {}
        self.send_log: Dict[int, Dict[int, SendLogEntry]] = {}
        self.log_floor: Dict[int, int] = {}
        self.stable_marks: Dict[int, int] = {}
        self.stable_coll = 0
        self.consumed: Dict[int, IdSet] = {}
        self.skip: Dict[int, Set[int]] = {}
        self.drained: List[DrainedChunk] = []
        self.coll_seq = 0
        self.coll_log: Dict[int, CollectiveLogEntry] = {}
        self.coll_floor = 0
        self.coll_done: Set[int] = set()
        self.completed_upto = 0
        self.queue: List[RequestHandle] = []
        self.pending_colls: Dict[int, RequestHandle] = {}
        self._log_bytes = 0

    # ----- identity -----

    @property
    def role(self) -> Role:
        role = self.world.role_of(self.uid)
        if role is None:
            raise RoutingError(f"uid {self.uid} has no role in epoch {self.world.epoch}")
        return role

    @property
    def rank(self) -> int:
        return self.role.logical_rank

    def set_world(self, world: WorldView) -> None:
        self.world = world

    def _new_handle(self, kind: str, **fields: Any) -> RequestHandle:
        self._handles += 1
        return RequestHandle(self._handles, kind, **fields)

    # ----- point-to-point -----

    def isend(self, dest_rank: int, payload: Any, tag: int = 0) -> RequestHandle:
        """
        Log the send and route it per the replica mapping.

        Computational senders reach the destination's computational copy, and
        its replica too when they have no replica of their own. Replica senders
        reach the destination's replica, or nothing if it has none.
        """
        world = self.world
        if not 0 <= dest_rank < world.nC:
            raise RoutingError(f"destination rank {dest_rank} outside 0..{world.nC - 1}")
        sid = self.send_counters.get(dest_rank, 0) + 1
        self.send_counters[dest_rank] = sid
        entry = SendLogEntry(sid, dest_rank, tag, copy.deepcopy(payload), payload_nbytes(payload), self.net.sim.now)
        self.send_log.setdefault(dest_rank, {})[sid] = entry
        self._log_bytes += entry.nbytes

        role = self.role
        handle = self._new_handle("send", peer=dest_rank, tag=tag)
        if not role.is_replica:
            handle.cmp_subreq = self._transmit(entry, world.cmp_group[dest_rank])
            if world.has_replica(dest_rank) and not world.has_replica(role.logical_rank):
                handle.rep_subreq = self._transmit(entry, world.rep_group[dest_rank])
        elif world.has_replica(dest_rank):
            handle.rep_subreq = self._transmit(entry, world.rep_group[dest_rank])
        else:
            self.stats["skipped_sends"] += 1
        self.queue.append(handle)
        return handle

    def _transmit(self, entry: SendLogEntry, dst_uid: int) -> TransportRequest:
        env = self.net.new_envelope(
            src_uid=self.uid,
            dst_uid=dst_uid,
            src_rank=self.rank,
            dst_rank=entry.dest_rank,
            kind=ChannelKind.P2P.value,
            send_id=entry.send_id,
            tag=entry.tag,
            epoch=self.world.epoch,
            payload=entry.payload,
            nbytes=entry.nbytes,
        )
        return self.net.isend(env)

    def irecv(self, src_rank: int, tag: int = 0) -> RequestHandle:
        """Post a receive; drained chunks are matched before the wire."""
        if not 0 <= src_rank < self.world.nC:
            raise RoutingError(f"source rank {src_rank} outside 0..{self.world.nC - 1}")
        handle = self._new_handle("recv", peer=src_rank, tag=tag)
        sub = self.net.irecv(self.uid, src_rank, tag)
        if self.role.is_replica:
            handle.rep_subreq = sub
        else:
            handle.cmp_subreq = sub
        self.queue.append(handle)
        self._try_match(sub)
        self._maybe_complete(handle)
        return handle

    def _try_match(self, sub: TransportRequest) -> None:
        payload, found = self._match(sub.peer_rank, sub.tag)
        if found:
            sub.done, sub.result = True, payload

    def _match(self, src: int, tag: int) -> Tuple[Any, bool]:
        """
        Find the next send-id from `src` carrying `tag`.

        A candidate x is taken only if every lower unconsumed id is already
        held locally, which keeps per-tag program order across resends.
        """
        consumed = self.consumed.setdefault(src, IdSet())
        skip = self.skip.get(src, set())
        available: Dict[int, Union[DrainedChunk, Envelope]] = {}

        for chunk in self.drained:
            if chunk.matched or chunk.src_rank != src:
                continue
            if chunk.send_id in consumed:
                chunk.matched = True
                self.stats["suppressed"] += 1
                continue
            available.setdefault(chunk.send_id, chunk)

        box = self.net.iprobe(self.uid)
        for env in list(box):
            if env.kind != ChannelKind.P2P.value:
                continue
            if env.epoch < self.world.epoch:
                self.net.discard(self.uid, env)
                self.stats["stale_dropped"] += 1
                log.warning("stale envelope dropped uid=%d epoch=%d env_epoch=%d", self.uid, self.world.epoch, env.epoch)
                continue
            if env.src_rank != src:
                continue
            if env.send_id in consumed or env.send_id in skip or env.send_id in available:
                self.net.discard(self.uid, env)
                self.stats["suppressed"] += 1
                continue
            available[env.send_id] = env

        candidates = sorted(x for x, item in available.items() if item.tag == tag)
        if not candidates:
            return None, False
        x = candidates[0]
        if any(y not in consumed and y not in available for y in range(consumed.floor + 1, x)):
            return None, False

        item = available[x]
        if isinstance(item, DrainedChunk):
            item.matched = True
            self.stats["from_drained"] += 1
        else:
            self.net.recv_probed(self.uid, item)
        if not consumed.add(x):
            self.stats["duplicated"] += 1
        self.stats["consumed"] += 1
        return item.payload, True

    # ----- collectives -----

    def collective(self, kind: str, contribution: Any = None, **params: Any) -> RequestHandle:
        """Issue collective number coll_seq + 1 and log it."""
        if kind not in COLLECTIVE_KINDS:
            raise ValueError(f"unknown collective kind {kind!r}")
        self.coll_seq += 1
        seq = self.coll_seq
        entry = CollectiveLogEntry(
            seq=seq,
            kind=kind,
            params=dict(params),
            digest=collective_digest(kind, params),
            contribution=copy.deepcopy(contribution),
            nbytes=payload_nbytes(contribution),
            timestamp=self.net.sim.now,
        )
        self.coll_log[seq] = entry
        self._log_bytes += entry.nbytes
        handle = self._new_handle("collective", coll_seq=seq)
        self._post_collective(handle, entry)
        self.pending_colls[seq] = handle
        self.queue.append(handle)
        return handle

    def _post_collective(self, handle: RequestHandle, entry: CollectiveLogEntry) -> None:
        world, role = self.world, self.role
        rank, epoch, seq = role.logical_rank, world.epoch, entry.seq
        post = functools.partial(
            self.net.post_collective,
            uid=self.uid,
            rank=rank,
            contribution=entry.contribution,
            digest=entry.digest,
            nbytes=entry.nbytes,
        )
        handle.cmp_subreq, handle.rep_subreq, handle.extra_subreqs = None, None, []
        if not role.is_replica:
            handle.cmp_subreq = post(("cmp", epoch, seq), world.cmp_group)
            if world.nR and not world.has_replica(rank):
                fill = world.cmp_no_rep_group
                for root in world.rep_group:
                    handle.extra_subreqs.append(post(("fill", epoch, seq, root), fill + (root,), eager=True))
        else:
            handle.rep_subreq = post(("rep", epoch, seq), world.rep_group)
            if world.cmp_no_rep_group:
                handle.extra_subreqs.append(post(("fill", epoch, seq, self.uid), world.cmp_no_rep_group + (self.uid,)))

    def _finish_collective(self, handle: RequestHandle) -> None:
        seq = handle.coll_seq
        entry = self.coll_log[seq]
        merged: Dict[int, Any] = {}
        for sub in handle.subrequests():
            if sub.result:
                merged.update(sub.result)
        contributions = [merged[r] for r in range(self.world.nC)]
        handle.result = combine(entry.kind, entry.params, contributions, self.rank)
        entry.result = handle.result
        entry.completed = True
        self.pending_colls.pop(seq, None)
        self.coll_done.add(seq)
        while self.completed_upto + 1 in self.coll_done:
            self.completed_upto += 1
            self.coll_done.discard(self.completed_upto)

    def collective_completed(self, seq: int) -> bool:
        return seq <= self.completed_upto or seq in self.coll_done

    def max_completed(self) -> int:
        return max(self.coll_done, default=self.completed_upto)

    def repost_pending(self, seq: int) -> None:
        """Re-issue a still-pending collective on the current world's group ops."""
        handle = self.pending_colls[seq]
        self._post_collective(handle, self.coll_log[seq])

    def repost_logged(self, seq: int) -> None:
        """
        Contribute a completed collective again so lagging peers can finish it.

        Raises:
            LogGapError: If the entry was already trimmed.
        """
        entry = self.coll_log.get(seq)
        if entry is None:
            raise LogGapError(f"uid {self.uid}: collective {seq} trimmed (floor={self.coll_floor})")
        self._post_collective(self._new_handle("collective", coll_seq=seq), entry)
        self.stats["replayed_collectives"] += 1

    # ----- progress -----

    def _maybe_complete(self, handle: RequestHandle) -> bool:
        if handle.completed:
            return True
        if not all(sub.done for sub in handle.subrequests()):
            return False
        if handle.kind == "recv":
            sub = handle.cmp_subreq or handle.rep_subreq
            handle.result = sub.result
        elif handle.kind == "collective":
            self._finish_collective(handle)
        handle.completed = True
        if handle in self.queue:
            self.queue.remove(handle)
        return True

    def _poll(self, handle: RequestHandle) -> None:
        for sub in handle.subrequests():
            if sub.done or sub.cancelled:
                continue
            if sub.op == "recv":
                self._try_match(sub)
            self.net.test(sub)
        self._maybe_complete(handle)

    def test(self, req: RequestHandle) -> bool:
        """One pass over the whole request queue; never blocks."""
        for handle in list(self.queue):
            self._poll(handle)
        if req not in self.queue:
            self._maybe_complete(req)
        return req.completed

    def wait(self, req: RequestHandle) -> Iterator["Directive"]:
        while not self.test(req):
            yield BLOCKED

    # ----- draining / recovery support -----

    def drain_inflight(self) -> List[DrainedChunk]:
        """
        Progress every pending request, then receive every envelope that has
        arrived into the drained-chunk list.
        """
        for handle in list(self.queue):
            self._poll(handle)
        chunks: List[DrainedChunk] = []
        box = self.net.iprobe(self.uid)
        for env in list(box):
            self.net.recv_probed(self.uid, env)
            if env.kind != ChannelKind.P2P.value:
                continue
            consumed = self.consumed.get(env.src_rank)
            held = any(
                not c.matched and c.src_rank == env.src_rank and c.send_id == env.send_id for c in self.drained
            )
            if (consumed is not None and env.send_id in consumed) or held:
                self.stats["suppressed"] += 1
                continue
            chunk = DrainedChunk(env.src_uid, env.src_rank, env.send_id, env.tag, env.payload, env.epoch)
            self.drained.append(chunk)
            chunks.append(chunk)
        self.stats["drained"] += len(chunks)
        return chunks

    def received_ids(self, src_rank: int) -> Tuple[IdSet, Set[int]]:
        """(consumed ids, ids held in unmatched drained chunks) for one channel."""
        consumed = self.consumed.get(src_rank, IdSet())
        held = {c.send_id for c in self.drained if not c.matched and c.src_rank == src_rank}
        return consumed, held

    def log_head(self, dest_rank: int) -> int:
        return self.send_counters.get(dest_rank, 0)

    def resend(self, dest_rank: int, send_ids: Sequence[int], dst_uid: int) -> int:
        """
        Retransmit logged entries to `dst_uid`; returns bytes sent.

        Raises:
            LogGapError: If an entry was already trimmed.
        """
        sent = 0
        entries = self.send_log.get(dest_rank, {})
        for sid in sorted(send_ids):
            entry = entries.get(sid)
            if entry is None:
                raise LogGapError(
                    f"uid {self.uid}: send-id {sid} to rank {dest_rank} not in log "
                    f"(floor={self.log_floor.get(dest_rank, 0)})"
                )
            self._transmit(entry, dst_uid)
            sent += entry.nbytes
        self.stats["resent"] += len(send_ids)
        return sent

    # ----- log trim -----

    @property
    def log_bytes(self) -> int:
        return self._log_bytes

    def mark_stable(self, send_counters: Dict[int, int], coll_seq: int) -> None:
        """Remember the counters of the newest committed checkpoint wave."""
        self.stable_marks = dict(send_counters)
        self.stable_coll = coll_seq

    def trim_logs(self, threshold_bytes: int) -> int:
        """Drop entries the newest committed wave made obsolete; returns freed bytes."""
        if self._log_bytes <= threshold_bytes:
            return 0
        freed = 0
        for dest, mark in self.stable_marks.items():
            entries = self.send_log.get(dest, {})
            for sid in [s for s in entries if s <= mark]:
                freed += entries.pop(sid).nbytes
            self.log_floor[dest] = max(self.log_floor.get(dest, 0), mark)
        for seq in [s for s in self.coll_log if s <= self.stable_coll and self.collective_completed(s)]:
            freed += self.coll_log.pop(seq).nbytes
            self.coll_floor = max(self.coll_floor, seq)
        self._log_bytes -= freed
        if freed:
            self.stats["trims"] += 1
            log.debug("log trim uid=%d freed=%d left=%d", self.uid, freed, self._log_bytes)
        return freed

    # ----- checkpoint state -----

    def snapshot_state(self) -> Dict[str, Any]:
        """Durable counters for a checkpoint record (JSON-compatible)."""
        return {
            "send_counters": {str(d): n for d, n in sorted(self.send_counters.items())},
            "consumed": {
                str(s): {"floor": ids.floor, "extras": sorted(ids.extras)}
                for s, ids in sorted(self.consumed.items())
            },
            "coll_seq": self.coll_seq,
        }

    def restore_state(self, state: Dict[str, Any], world: WorldView) -> None:
        """Reset to a checkpointed program point; logs restart empty at the wave's counters."""
        self._reset()
        self.world = world
        self.send_counters = {int(d): int(n) for d, n in state.get("send_counters", {}).items()}
        self.log_floor = dict(self.send_counters)
        self.stable_marks = dict(self.send_counters)
        self.consumed = {
            int(s): IdSet(int(v["floor"]), set(v.get("extras", ()))) for s, v in state.get("consumed", {}).items()
        }
        self.coll_seq = int(state.get("coll_seq", 0))
        self.coll_floor = self.stable_coll = self.completed_upto = self.coll_seq


# =============================================================================
# Virtual processes
# =============================================================================

@dataclass(frozen=True)
class ComputeUntil:
    time: float


@dataclass(frozen=True)
class SafePoint:
    step: int


@dataclass(frozen=True)
class LogTrim:
    freed: int


class _Blocked:
    def __repr__(self) -> str:
        return "BLOCKED"


BLOCKED = _Blocked()

Directive = Union[ComputeUntil, SafePoint, LogTrim, _Blocked]


@dataclass
class VirtualProcess:
    """Everything needed to resume a process: app state plus program counter."""

    uid: int
    runtime: Runtime
    app_state: Dict[str, Any]
    step: int = 0
    pc: int = 0
    scratch: Dict[str, Any] = field(default_factory=dict)
    pending: List[Tuple[Optional[str], RequestHandle]] = field(default_factory=list)
    compute_until: float = 0.0
    done: bool = False

    @property
    def rank(self) -> int:
        return self.runtime.rank


class StepContext:
    """What an app phase sees: its state, scratch space and the comm API."""

    def __init__(self, vp: VirtualProcess) -> None:
        self._rt = vp.runtime
        self.state = vp.app_state
        self.scratch = vp.scratch
        self.step = vp.step
        self.rank = vp.runtime.rank
        self.size = vp.runtime.world.nC
        self.compute_s = 0.0
        self.pending: List[Tuple[Optional[str], RequestHandle]] = []

    def compute(self, seconds: float) -> None:
        self.compute_s += seconds

    def isend(self, dest: int, payload: Any, tag: int = 0) -> None:
        self.pending.append((None, self._rt.isend(dest, payload, tag)))

    def irecv(self, src: int, tag: int = 0, *, into: str) -> None:
        self.pending.append((into, self._rt.irecv(src, tag)))

    def _coll(self, kind: str, into: Optional[str], contribution: Any = None, **params: Any) -> None:
        self.pending.append((into, self._rt.collective(kind, contribution, **params)))

    def allreduce(self, value: Any, op: str = "sum", *, into: str) -> None:
        self._coll("allreduce", into, value, op=op)

    def allgather(self, value: Any, *, into: str) -> None:
        self._coll("allgather", into, value)

    def bcast(self, value: Any, root: int = 0, *, into: str) -> None:
        self._coll("bcast", into, value if self.rank == root else None, root=root)

    def barrier(self) -> None:
        self._coll("barrier", None)

    def gather(self, value: Any, root: int = 0, *, into: str) -> None:
        self._coll("gather", into, value, root=root)

    def scatter(self, values: Optional[Sequence[Any]], root: int = 0, *, into: str) -> None:
        self._coll("scatter", into, list(values) if self.rank == root and values is not None else None, root=root)

    def alltoall(self, values: Sequence[Any], *, into: str) -> None:
        self._coll("alltoall", into, list(values))


class AppProgram(Protocol):
    total_steps: int

    def phases(self) -> Sequence[Callable[[StepContext], None]]: ...


def drive(vp: VirtualProcess, app: AppProgram, clock: Callable[[], float]) -> Iterator[Directive]:
    """
    Interpret `app` for one process.

    Each step is a list of phases. A phase posts requests and charges compute;
    the next phase runs once the compute has elapsed and every request it
    posted has completed. Step boundaries yield SafePoint.
    """
    phases = app.phases()
    rt = vp.runtime
    while not vp.done:
        now = clock()
        if vp.compute_until > now:
            yield ComputeUntil(vp.compute_until)
            continue

        had_collective = False
        while vp.pending:
            into, handle = vp.pending[0]
            yield from rt.wait(handle)
            vp.pending.pop(0)
            had_collective = had_collective or handle.kind == "collective"
            if into is not None:
                vp.scratch[into] = handle.result
        if had_collective and rt.log_bytes > rt.log_trim_bytes:
            freed = rt.trim_logs(rt.log_trim_bytes)
            if freed:
                yield LogTrim(freed)
                continue

        if vp.pc >= len(phases):
            vp.step += 1
            vp.pc = 0
            vp.scratch.clear()
            if vp.step >= app.total_steps:
                vp.done = True
                return
            yield SafePoint(vp.step)
            continue

        ctx = StepContext(vp)
        phases[vp.pc](ctx)
        vp.pc += 1
        vp.pending = ctx.pending
        if ctx.compute_s > 0:
            vp.compute_until = clock() + ctx.compute_s


def clone_process(vp: VirtualProcess, uid: int, *, shared: Sequence[Any]) -> VirtualProcess:
    """
    Deep-copy a process's whole state under a new uid.

    Objects in `shared` (transport, simulator) are kept by reference.
    """
    memo = {id(obj): obj for obj in shared}
    twin = copy.deepcopy(vp, memo)
    twin.uid = uid
    twin.runtime.uid = uid
    return twin


__all__ = [
    "ChannelKind",
    "COLLECTIVE_KINDS",
    "IdSet",
    "SendLogEntry",
    "CollectiveLogEntry",
    "DrainedChunk",
    "RequestHandle",
    "collective_digest",
    "combine",
    "Runtime",
    "ComputeUntil",
    "SafePoint",
    "LogTrim",
    "BLOCKED",
    "Directive",
    "VirtualProcess",
    "StepContext",
    "AppProgram",
    "drive",
    "clone_process",
]
