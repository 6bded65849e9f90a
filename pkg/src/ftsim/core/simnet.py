# src/ftsim/core/simnet.py
"""
Deterministic discrete-event substrate.

Pieces
------
- Simulator: a heap of (time, seq, event); equal times dispatch in schedule
  order, and every dispatched event is folded into a sha256 trace hash.
- NativeTransport: a fault-intolerant message layer (reliable FIFO p2p plus
  all-gather style group operations). It knows nothing about replicas.
- InterceptionLayer: hides failure observations from the native layer and
  forwards them to the local coordinator. Disabled, any death aborts the job.
- CoordinatorNetwork: one coordinator per node, grouped hierarchically under
  a primary that owns the checkpoint timer.
- SimNet: the facade the job driver talks to.
"""

from __future__ import annotations

import hashlib
import heapq
import json
import logging
import math
from collections import Counter, deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Any, Callable, Deque, Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

from .errors import CollectiveMismatchError, JobAborted, SchedulingError
from .schemas import SimConfig

log = logging.getLogger(__name__)

UP = "up"
DOWN = "down"

# Calls the native layer offers but the runtime must never make.
BLOCKING_CALLS = ("send", "recv", "wait")


# =============================================================================
# Event engine
# =============================================================================

@dataclass
class SimEvent:
    time: float
    seq: int
    kind: str
    payload: Dict[str, Any] = field(default_factory=dict)
    cancelled: bool = False


class Simulator:
    """
    Single-threaded event loop.

    Handlers are registered per event kind with `on(kind, fn)`. The trace hash
    covers (t, seq, kind, payload) of every dispatched, non-cancelled event.
    """

    def __init__(self, *, trace_path: Optional[Path] = None) -> None:
        self.now: float = 0.0
        self._seq = 0
        self._heap: List[Tuple[float, int, SimEvent]] = []
        self._live: Dict[int, SimEvent] = {}
        self._handlers: Dict[str, Callable[[SimEvent], None]] = {}
        self._hash = hashlib.sha256()
        self._trace_path = trace_path
        self._trace_fh: Optional[IO[str]] = None
        self._stopped = False
        self.dispatched = 0
        self.counts: Counter[str] = Counter()
        # called with each event after its handler ran (fault-injection sweeps)
        self.after_dispatch: Optional[Callable[[SimEvent], None]] = None

    # ----- registration / scheduling -----

    def on(self, kind: str, handler: Callable[[SimEvent], None]) -> None:
        self._handlers[kind] = handler

    def schedule(self, kind: str, at: float, **payload: Any) -> int:
        """
        Enqueue an event; returns its id (the tie-breaking sequence number).

        Raises:
            SchedulingError: If `at` lies before the current time.
        """
        if at < self.now:
            raise SchedulingError(f"cannot schedule {kind!r} at t={at!r} before now={self.now!r}")
        self._seq += 1
        ev = SimEvent(float(at), self._seq, kind, payload)
        heapq.heappush(self._heap, (ev.time, ev.seq, ev))
        self._live[ev.seq] = ev
        return ev.seq

    def cancel(self, event_id: Optional[int]) -> bool:
        if event_id is None:
            return False
        ev = self._live.pop(event_id, None)
        if ev is None:
            return False
        ev.cancelled = True
        return True

    def event_time(self, event_id: Optional[int]) -> Optional[float]:
        ev = self._live.get(event_id) if event_id is not None else None
        return None if ev is None else ev.time

    def pending(self, kind: Optional[str] = None) -> List[SimEvent]:
        evs = [ev for ev in self._live.values() if kind is None or ev.kind == kind]
        return sorted(evs, key=lambda e: (e.time, e.seq))

    def stop(self) -> None:
        self._stopped = True

    # ----- loop -----

    def run(self, until: Optional[float] = None) -> None:
        self._stopped = False
        if self._trace_path is not None and self._trace_fh is None:
            self._trace_path.parent.mkdir(parents=True, exist_ok=True)
            self._trace_fh = self._trace_path.open("w", encoding="utf-8")
        try:
            while self._heap and not self._stopped:
                t, _, ev = self._heap[0]
                if until is not None and t > until:
                    self.now = max(self.now, until)
                    break
                heapq.heappop(self._heap)
                if ev.cancelled:
                    continue
                del self._live[ev.seq]
                self.now = t
                self._record(ev)
                handler = self._handlers.get(ev.kind)
                if handler is None:
                    raise KeyError(f"no handler registered for event kind {ev.kind!r}")
                handler(ev)
                if self.after_dispatch is not None:
                    self.after_dispatch(ev)
        finally:
            if self._trace_fh is not None:
                self._trace_fh.flush()

    def close(self) -> None:
        if self._trace_fh is not None:
            self._trace_fh.close()
            self._trace_fh = None

    def _record(self, ev: SimEvent) -> None:
        line = json.dumps(
            {"t": ev.time, "seq": ev.seq, "kind": ev.kind, **ev.payload},
            sort_keys=True,
            separators=(",", ":"),
        )
        self._hash.update(line.encode("utf-8"))
        self._hash.update(b"\n")
        self.dispatched += 1
        self.counts[ev.kind] += 1
        if self._trace_fh is not None:
            self._trace_fh.write(line + "\n")

    @property
    def trace_hash(self) -> str:
        return self._hash.hexdigest()


# =============================================================================
# Native transport
# =============================================================================

@dataclass
class Envelope:
    """Wire format of one point-to-point message."""

    env_id: int
    src_uid: int
    dst_uid: int
    src_rank: int
    dst_rank: int
    kind: str
    send_id: int
    tag: int
    epoch: int
    payload: Any
    nbytes: int


@dataclass
class TransportRequest:
    """A native non-blocking request; `result` is set on completion."""

    req_id: int
    op: str
    uid: int
    peer_rank: Optional[int] = None
    tag: Optional[int] = None
    key: Optional[Tuple[Any, ...]] = None
    done: bool = False
    cancelled: bool = False
    result: Any = None
    polls: int = 0


@dataclass
class GroupOp:
    """All-gather of per-logical-rank contributions over a fixed member set."""

    op_id: int
    key: Tuple[Any, ...]
    members: FrozenSet[int]
    digest: str
    contributions: Dict[int, Any] = field(default_factory=dict)
    posted: Set[int] = field(default_factory=set)
    waiters: List[TransportRequest] = field(default_factory=list)
    nbytes: int = 0
    event_id: Optional[int] = None
    done: bool = False


class NativeTransport:
    """
    Reliable FIFO point-to-point delivery plus native group operations.

    Arrived envelopes wait in a per-process mailbox until the runtime probes
    and receives them. Delivery order per (src, dst) pair equals send order.
    """

    def __init__(
        self,
        sim: Simulator,
        *,
        latency_base_s: float,
        latency_per_byte_s: float,
        on_arrival: Callable[[int], None] = lambda uid: None,
        on_dead_peer: Callable[[Envelope], None] = lambda env: None,
    ) -> None:
        self.sim = sim
        self.latency_base_s = latency_base_s
        self.latency_per_byte_s = latency_per_byte_s
        self.on_arrival = on_arrival
        self.on_dead_peer = on_dead_peer
        self.peer_status: Dict[int, str] = {}
        self.mailbox: Dict[int, Deque[Envelope]] = {}
        self.calls: Counter[str] = Counter()
        self.aborts = 0
        self.bytes_sent = 0
        self._ids = 0
        self._inflight: Dict[int, Tuple[int, Envelope]] = {}
        self._last_arrival: Dict[Tuple[int, int], float] = {}
        self._ops: Dict[Tuple[Any, ...], GroupOp] = {}
        self._ops_by_id: Dict[int, GroupOp] = {}
        sim.on("deliver", self._on_deliver)
        sim.on("coll_done", self._on_coll_done)

    # ----- membership -----

    def register(self, uid: int) -> None:
        self.peer_status[uid] = UP
        self.mailbox.setdefault(uid, deque())

    def is_up(self, uid: int) -> bool:
        return self.peer_status.get(uid) == UP

    def mark_down(self, uid: int) -> bool:
        if not self.is_up(uid):
            return False
        self.peer_status[uid] = DOWN
        self.mailbox.pop(uid, None)
        return True

    def latency(self, nbytes: int) -> float:
        return self.latency_base_s + self.latency_per_byte_s * nbytes

    def _next_id(self) -> int:
        self._ids += 1
        return self._ids

    # ----- point-to-point -----

    def new_envelope(self, **fields: Any) -> Envelope:
        return Envelope(env_id=self._next_id(), **fields)

    def isend(self, env: Envelope) -> TransportRequest:
        """Eager non-blocking send: the request completes on post."""
        self.calls["isend"] += 1
        req = TransportRequest(self._next_id(), "send", env.src_uid, env.dst_rank, env.tag, done=True)
        if not self.is_up(env.dst_uid):
            self.on_dead_peer(env)
            return req
        arrival = max(self.sim.now + self.latency(env.nbytes), self._last_arrival.get((env.src_uid, env.dst_uid), 0.0))
        self._last_arrival[(env.src_uid, env.dst_uid)] = arrival
        event_id = self.sim.schedule("deliver", arrival, env=env.env_id, dst=env.dst_uid)
        self._inflight[env.env_id] = (event_id, env)
        self.bytes_sent += env.nbytes
        return req

    def irecv(self, uid: int, src_rank: int, tag: int) -> TransportRequest:
        self.calls["irecv"] += 1
        return TransportRequest(self._next_id(), "recv", uid, src_rank, tag)

    def test(self, req: TransportRequest) -> bool:
        self.calls["test"] += 1
        req.polls += 1
        return req.done

    def iprobe(self, uid: int) -> Deque[Envelope]:
        """Envelopes that arrived for `uid` and were not received yet."""
        self.calls["iprobe"] += 1
        return self.mailbox.get(uid, deque())

    def recv_probed(self, uid: int, env: Envelope) -> Envelope:
        """Receive an envelope a previous iprobe reported as ready."""
        self.calls["recv_probed"] += 1
        self.mailbox[uid].remove(env)
        return env

    def discard(self, uid: int, env: Envelope) -> None:
        box = self.mailbox.get(uid)
        if box is not None and env in box:
            box.remove(env)

    def _on_deliver(self, ev: SimEvent) -> None:
        _, env = self._inflight.pop(ev.payload["env"])
        self._arrive(env)

    def _arrive(self, env: Envelope) -> None:
        if not self.is_up(env.dst_uid):
            self.on_dead_peer(env)
            return
        self.mailbox[env.dst_uid].append(env)
        self.on_arrival(env.dst_uid)

    def in_flight(self) -> int:
        return len(self._inflight)

    def flush(self, *, deliver: bool = True) -> int:
        """
        Force every in-flight envelope onto the wire's far end now.

        Envelopes land in their arrival order; with `deliver=False` they are
        dropped instead. Returns the number of envelopes handled.
        """
        pending = sorted(
            self._inflight.values(),
            key=lambda item: (self.sim.event_time(item[0]) or 0.0, item[0]),
        )
        self._inflight.clear()
        for event_id, env in pending:
            self.sim.cancel(event_id)
            if deliver:
                self._arrive(env)
        return len(pending)

    # ----- group operations -----

    def post_collective(
        self,
        key: Tuple[Any, ...],
        members: Iterable[int],
        uid: int,
        rank: int,
        contribution: Any,
        digest: str,
        nbytes: int,
        *,
        eager: bool = False,
    ) -> TransportRequest:
        """
        Contribute to the group operation `key`.

        Eager posts complete immediately (fill-in senders); the others complete
        once every member has posted.

        Raises:
            CollectiveMismatchError: If `digest` differs from earlier posts.
        """
        self.calls["coll_post"] += 1
        op = self._ops.get(key)
        if op is None:
            op = GroupOp(self._next_id(), key, frozenset(members), digest)
            self._ops[key] = op
            self._ops_by_id[op.op_id] = op
        if op.digest != digest:
            raise CollectiveMismatchError(
                f"collective {key} posted with digest {digest[:12]} by uid {uid}, expected {op.digest[:12]}"
            )
        req = TransportRequest(self._next_id(), "coll", uid, key=key)
        if uid not in op.posted:
            op.posted.add(uid)
            op.contributions.setdefault(rank, contribution)
            op.nbytes += nbytes
        if eager:
            req.done = True
        elif op.done:
            req.done, req.result = True, op.contributions
        else:
            op.waiters.append(req)
        if not op.done and op.event_id is None and op.members <= op.posted:
            op.event_id = self.sim.schedule("coll_done", self.sim.now + self.latency(op.nbytes), op=op.op_id)
        return req

    def _on_coll_done(self, ev: SimEvent) -> None:
        op = self._ops_by_id.get(ev.payload["op"])
        if op is None:
            return
        op.done = True
        woken: List[int] = []
        for req in op.waiters:
            if not req.cancelled:
                req.done, req.result = True, op.contributions
                woken.append(req.uid)
        op.waiters.clear()
        for uid in woken:
            self.on_arrival(uid)

    def cancel_ops(self, before_epoch: int) -> int:
        """Drop every group operation keyed with an epoch older than `before_epoch`."""
        stale = [key for key in self._ops if key[1] < before_epoch]
        for key in stale:
            op = self._ops.pop(key)
            self._ops_by_id.pop(op.op_id, None)
            self.sim.cancel(op.event_id)
            for req in op.waiters:
                req.cancelled = True
        return len(stale)

    def blocking_calls(self) -> int:
        return sum(self.calls[name] for name in BLOCKING_CALLS)


# =============================================================================
# Interception
# =============================================================================

@dataclass
class Observation:
    """A failure as seen by the native layer; `uid` is None when ambiguous."""

    uid: Optional[int]
    time: float
    node: int
    source: str = "exit"
    detected_at: Optional[float] = None


class InterceptionLayer:
    """
    Sits between the runtime and the native transport.

    Enabled, it swallows every failure observation (and every message to a
    dead peer) and forwards the observation to the coordinators. Disabled,
    the first observation takes the native abort path.
    """

    def __init__(self, transport: NativeTransport, *, enabled: bool = True) -> None:
        self.transport = transport
        self.enabled = enabled
        self.suppressed_observations: List[Observation] = []
        self.dropped_to_dead = 0
        transport.on_dead_peer = self._drop

    def capture(self, obs: Observation) -> None:
        if not self.enabled:
            self.transport.aborts += 1
            raise JobAborted(f"native transport observed death of uid {obs.uid} at t={obs.time:.6f}")
        self.suppressed_observations.append(obs)

    def _drop(self, env: Envelope) -> None:
        if not self.enabled:
            self.transport.aborts += 1
            raise JobAborted(f"native send to dead uid {env.dst_uid}")
        self.dropped_to_dead += 1

    def release(self) -> List[Observation]:
        """Hand back captured observations in capture order and forget them."""
        out, self.suppressed_observations = self.suppressed_observations, []
        return out


# =============================================================================
# Coordinators
# =============================================================================

@dataclass
class Coordinator:
    node_id: int
    local_members: Set[int] = field(default_factory=set)
    group_leader: int = 0
    is_primary: bool = False
    ckpt_timer: Optional[float] = None
    known_dead: Dict[int, float] = field(default_factory=dict)
    polls: int = 0

    @property
    def is_leader(self) -> bool:
        return self.group_leader == self.node_id

    def resolve(self, obs: Observation, is_up: Callable[[int], bool]) -> Set[int]:
        """Identify the dead; an ambiguous observation polls every local member."""
        if obs.uid is not None:
            return {obs.uid}
        dead: Set[int] = set()
        for uid in sorted(self.local_members):
            self.polls += 1
            if not is_up(uid):
                dead.add(uid)
        return dead


class CoordinatorNetwork:
    """
    Hierarchy: G groups of contiguous nodes, each led by its first node;
    node 0 is the primary and leads group 0.

    A failure notice costs O(G) messages: the hops up to the primary, one
    message per leader, one multicast per group.
    """

    def __init__(self, n_nodes: int, *, groups: int = 0, hop_s: float = 0.001) -> None:
        n_nodes = max(1, n_nodes)
        G = groups or max(1, int(round(math.sqrt(n_nodes))))
        G = min(G, n_nodes)
        size = math.ceil(n_nodes / G)
        self.hop_s = hop_s
        self.coordinators: List[Coordinator] = [
            Coordinator(node_id=n, group_leader=(n // size) * size, is_primary=(n == 0))
            for n in range(n_nodes)
        ]
        self.leaders: List[int] = sorted({c.group_leader for c in self.coordinators})
        self.node_of: Dict[int, int] = {}
        self.messages = 0

    @property
    def primary(self) -> Coordinator:
        return self.coordinators[0]

    @property
    def n_groups(self) -> int:
        return len(self.leaders)

    def add_member(self, uid: int, node: int) -> None:
        self.node_of[uid] = node
        self.coordinators[node].local_members.add(uid)

    def remove_member(self, uid: int) -> None:
        node = self.node_of.get(uid)
        if node is not None:
            self.coordinators[node].local_members.discard(uid)

    def _group(self, leader: int) -> List[Coordinator]:
        return [c for c in self.coordinators if c.group_leader == leader]

    def _multicast(self, learned: Dict[int, float], leader: int) -> None:
        """One leader-to-group message reaching every member that has not heard yet."""
        missing = [c.node_id for c in self._group(leader) if c.node_id not in learned]
        if not missing:
            return
        for node in missing:
            learned[node] = learned[leader] + self.hop_s
        self.messages += 1

    def _fan_out(self, learned: Dict[int, float], start_leader: int, t_start: float) -> None:
        """From the primary at t_start, reach every leader and then every member."""
        for leader in self.leaders:
            if leader not in learned:
                learned[leader] = t_start + self.hop_s
                self.messages += 1
            self._multicast(learned, leader)

    def propagate_failure(self, obs: Observation, dead: Set[int], now: float) -> float:
        """
        Spread `dead` from the observing node to every coordinator.

        Route: local coordinator -> group leader -> primary -> other leaders
        -> their members. Returns the time every live process has been told.
        """
        origin = self.coordinators[obs.node]
        learned: Dict[int, float] = {origin.node_id: now + self.hop_s}
        t = learned[origin.node_id]
        if not origin.is_leader:
            t += self.hop_s
            learned[origin.group_leader] = t
            self.messages += 1
        if origin.group_leader != self.primary.node_id:
            t += self.hop_s
            learned[self.primary.node_id] = t
            self.messages += 1
        self._multicast(learned, origin.group_leader)
        self._fan_out(learned, self.primary.node_id, learned[self.primary.node_id])
        for node, when in learned.items():
            for uid in dead:
                self.coordinators[node].known_dead.setdefault(uid, when)
        return max(learned.values()) + self.hop_s

    def broadcast_checkpoint(self, now: float) -> float:
        """Primary -> leaders -> members -> local processes; returns arrival time."""
        self.primary.ckpt_timer = None
        learned: Dict[int, float] = {self.primary.node_id: now}
        self._fan_out(learned, self.primary.node_id, now)
        return max(learned.values()) + self.hop_s

    def restart_timer(self, deadline: Optional[float]) -> None:
        self.primary.ckpt_timer = deadline


# =============================================================================
# Facade
# =============================================================================

class SimNet:
    """Simulator + native transport + interception + coordinators for one job."""

    def __init__(
        self,
        config: SimConfig,
        *,
        n_processes: int,
        interception: bool = True,
        trace_path: Optional[Path] = None,
    ) -> None:
        self.config = config
        self.sim = Simulator(trace_path=trace_path)
        self.transport = NativeTransport(
            self.sim,
            latency_base_s=config.latency_base_s,
            latency_per_byte_s=config.latency_per_byte_s,
        )
        self.interception = InterceptionLayer(self.transport, enabled=interception)
        n_nodes = max(1, math.ceil(n_processes / config.cores_per_node))
        self.coordinators = CoordinatorNetwork(n_nodes, groups=config.coord_groups, hop_s=config.coord_hop_s)

    @property
    def now(self) -> float:
        return self.sim.now

    def schedule(self, kind: str, at: float, **payload: Any) -> int:
        return self.sim.schedule(kind, at, **payload)

    def add_process(self, uid: int, node: int) -> None:
        self.transport.register(uid)
        self.coordinators.add_member(uid, node)

    def kill_process(self, uid: int, at: Optional[float] = None) -> Optional[Observation]:
        """
        Fail-stop `uid`.

        A future `at` only schedules a "kill" event carrying the uid. An
        immediate kill marks the peer down (in-flight envelopes it sent still
        deliver), lets the interception layer capture the observation and
        propagates it through the coordinators. Killing a dead process is a
        no-op and returns None.
        """
        if at is not None and at > self.now:
            self.schedule("kill", at, uid=uid)
            return None
        if not self.transport.mark_down(uid):
            return None
        node = self.coordinators.node_of.get(uid, 0)
        obs = Observation(uid=uid, time=self.now, node=node)
        self.interception.capture(obs)
        self.report_observation(obs)
        return obs

    def report_observation(self, obs: Observation) -> Set[int]:
        coord = self.coordinators.coordinators[obs.node]
        dead = coord.resolve(obs, self.transport.is_up)
        obs.detected_at = self.coordinators.propagate_failure(obs, dead, self.now)
        log.debug("failure observed uids=%s node=%d notify_at=%.6f", sorted(dead), obs.node, obs.detected_at)
        return dead

    def observe_failures(self, node: int) -> Set[int]:
        coord = self.coordinators.coordinators[node]
        return {uid for uid, when in coord.known_dead.items() if when <= self.now}

    def coordinator_broadcast_checkpoint(self) -> float:
        return self.coordinators.broadcast_checkpoint(self.now)


def observe_failures(net: SimNet, node: int) -> Set[int]:
    """Dead uids the coordinator of `node` knows about at the current time."""
    return net.observe_failures(node)


def coordinator_broadcast_checkpoint(net: SimNet) -> float:
    """Fan a checkpoint request out from the primary; returns when it reaches every process."""
    return net.coordinator_broadcast_checkpoint()


__all__ = [
    "UP",
    "DOWN",
    "BLOCKING_CALLS",
    "SimEvent",
    "Simulator",
    "Envelope",
    "TransportRequest",
    "GroupOp",
    "NativeTransport",
    "Observation",
    "InterceptionLayer",
    "Coordinator",
    "CoordinatorNetwork",
    "SimNet",
    "observe_failures",
    "coordinator_broadcast_checkpoint",
]
