# src/ftsim/core/topology.py
"""
Process identity, the computational/replica split and the six logical groups.

A WorldView is an immutable snapshot. Computational processes are indexed by
logical rank (cmp_group[r] runs rank r); replicas always cover a prefix of
logical ranks, so rep_group[r] is the replica of rank r for r < nR.

Repairs never mutate a view: shrink/promote return a new one with epoch + 1.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Set, Tuple

from .errors import RoutingError, TopologyConstructionError, UnrecoverableWorldError

log = logging.getLogger(__name__)

# Globally unique process identifier, never reused within a job.
ProcessId = int


class Side(str, Enum):
    CMP = "cmp"
    REP = "rep"


@dataclass(frozen=True)
class Role:
    """What a process is in the current world: its side and logical rank."""

    side: Side
    logical_rank: int

    @property
    def is_replica(self) -> bool:
        return self.side is Side.REP


@dataclass(frozen=True)
class Bridge:
    """Inter-group link (local group, remote group)."""

    local: Tuple[ProcessId, ...]
    remote: Tuple[ProcessId, ...]


@dataclass(frozen=True)
class WorldView:
    cmp_group: Tuple[ProcessId, ...]
    rep_group: Tuple[ProcessId, ...] = ()
    epoch: int = 0
    _roles: Dict[ProcessId, Role] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self) -> None:
        roles: Dict[ProcessId, Role] = {}
        for rank, uid in enumerate(self.cmp_group):
            roles[uid] = Role(Side.CMP, rank)
        for rank, uid in enumerate(self.rep_group):
            roles[uid] = Role(Side.REP, rank)
        object.__setattr__(self, "_roles", roles)

    # ----- sizes -----

    @property
    def nC(self) -> int:
        return len(self.cmp_group)

    @property
    def nR(self) -> int:
        return len(self.rep_group)

    @property
    def size(self) -> int:
        return self.nC + self.nR

    # ----- groups -----

    @property
    def world(self) -> Tuple[ProcessId, ...]:
        return self.cmp_group + self.rep_group

    @property
    def cmp_no_rep_group(self) -> Tuple[ProcessId, ...]:
        return self.cmp_group[self.nR:]

    @property
    def cmp_rep_bridge(self) -> Optional[Bridge]:
        if not self.rep_group:
            return None
        return Bridge(self.cmp_group, self.rep_group)

    @property
    def cmp_no_rep_bridge(self) -> Optional[Bridge]:
        if not self.rep_group or not self.cmp_no_rep_group:
            return None
        return Bridge(self.cmp_no_rep_group, self.rep_group)

    @property
    def replica_map(self) -> Dict[int, ProcessId]:
        return {rank: uid for rank, uid in enumerate(self.rep_group)}

    # ----- lookups -----

    def role_of(self, uid: ProcessId) -> Optional[Role]:
        return self._roles.get(uid)

    def contains(self, uid: ProcessId) -> bool:
        return uid in self._roles

    def has_replica(self, logical_rank: int) -> bool:
        return logical_rank < self.nR

    def copies(self, logical_rank: int) -> Tuple[ProcessId, ...]:
        """Every live process running `logical_rank`, computational first."""
        cmp = self.cmp_group[logical_rank]
        if self.has_replica(logical_rank):
            return (cmp, self.rep_group[logical_rank])
        return (cmp,)

    def responsible_sender(self, src_rank: int, receiver: ProcessId) -> ProcessId:
        """
        The process whose sends to `receiver` carry logical rank `src_rank`.

        Computational receivers hear from computational sources; replicas hear
        from the source's replica, or from its computational process when the
        source is unreplicated.
        """
        role = self.role_of(receiver)
        if role is None:
            raise RoutingError(f"uid {receiver} is not part of epoch {self.epoch}")
        if role.is_replica and self.has_replica(src_rank):
            return self.rep_group[src_rank]
        return self.cmp_group[src_rank]

    def check_invariants(self) -> None:
        """Raise TopologyConstructionError if the view breaks a structural invariant."""
        everyone = self.world
        if len(set(everyone)) != len(everyone):
            raise TopologyConstructionError(f"duplicate uids in world epoch={self.epoch}: {everyone}")
        if self.nR > self.nC:
            raise TopologyConstructionError(f"nR={self.nR} exceeds nC={self.nC}")
        if set(self.cmp_group) & set(self.rep_group):
            raise TopologyConstructionError("a uid is both computational and replica")
        if sorted(self.replica_map) != list(range(self.nR)):
            raise TopologyConstructionError("replicas do not cover a logical-rank prefix")


# ----- Construction -----

def build_world(N: int, M: int, uids: Sequence[ProcessId]) -> WorldView:
    """
    Lay out N computational processes followed by M replicas of ranks 0..M-1.

    Raises:
        TopologyConstructionError: If M is outside [0, N], the uid count is not
            N + M, or uids repeat.
    """
    if N <= 0:
        raise TopologyConstructionError(f"N must be positive, got {N}")
    if M < 0 or M > N:
        raise TopologyConstructionError(f"replica count M={M} must lie in [0, N={N}]")
    if len(uids) != N + M:
        raise TopologyConstructionError(f"expected {N + M} uids, got {len(uids)}")
    if len(set(uids)) != len(uids):
        raise TopologyConstructionError(f"duplicate uids: {list(uids)}")
    world = WorldView(tuple(uids[:N]), tuple(uids[N:]), epoch=0)
    log.debug("build_world N=%d M=%d", N, M)
    return world


# ----- Repair algebra -----

def _repack(cmp: List[ProcessId], replicas: Dict[int, ProcessId]) -> Tuple[ProcessId, ...]:
    """
    Move surviving replicas so they cover ranks 0..k-1 with the fewest moves.

    Replicas already inside the prefix stay; the ones beyond it fill the
    holes in ascending rank order.
    """
    k = len(replicas)
    staying = {r: uid for r, uid in replicas.items() if r < k}
    movers = [replicas[r] for r in sorted(replicas) if r >= k]
    holes = [r for r in range(k) if r not in staying]
    for hole, uid in zip(holes, movers):
        staying[hole] = uid
    return tuple(staying[r] for r in range(k))


def moved_replicas(before: WorldView, after: WorldView) -> Dict[ProcessId, int]:
    """Replicas whose logical rank changed between two views: uid -> new rank."""
    out: Dict[ProcessId, int] = {}
    for rank, uid in enumerate(after.rep_group):
        old = before.role_of(uid)
        if old is not None and old.is_replica and old.logical_rank != rank:
            out[uid] = rank
    return out


def promoted_replicas(before: WorldView, after: WorldView) -> Dict[ProcessId, int]:
    """Replicas of `before` that are computational in `after`: uid -> rank."""
    out: Dict[ProcessId, int] = {}
    for rank, uid in enumerate(after.cmp_group):
        old = before.role_of(uid)
        if old is not None and old.is_replica:
            out[uid] = rank
    return out


def lost_ranks(world: WorldView, failed: Iterable[ProcessId]) -> Tuple[int, ...]:
    """Logical ranks whose every copy is in `failed`."""
    dead = set(failed)
    return tuple(r for r in range(world.nC) if all(uid in dead for uid in world.copies(r)))


def _rebuild(
    world: WorldView,
    dead: Set[ProcessId],
    spawn: Optional[Callable[[int], ProcessId]] = None,
) -> WorldView:
    cmp = list(world.cmp_group)
    replicas = dict(world.replica_map)
    for r in sorted(replicas):
        if replicas[r] in dead:
            del replicas[r]
    for r, uid in enumerate(cmp):
        if uid not in dead:
            continue
        if r in replicas:
            # the replica takes over; its own slot is dropped, not backfilled
            cmp[r] = replicas.pop(r)
        elif spawn is not None:
            cmp[r] = spawn(r)
    return WorldView(tuple(cmp), _repack(cmp, replicas), epoch=world.epoch + 1)


def shrink(world: WorldView, failed: Iterable[ProcessId]) -> WorldView:
    """
    Remove failed processes, promoting replicas of dead computational ranks.

    uids that are not in the view are ignored, so shrinking twice with the
    same set is harmless.

    Raises:
        UnrecoverableWorldError: If both copies of a logical rank are in `failed`.
    """
    dead = {uid for uid in failed if world.contains(uid)}
    lost = lost_ranks(world, dead)
    if lost:
        raise UnrecoverableWorldError(
            f"logical ranks {list(lost)} lost every copy (epoch={world.epoch})", lost_ranks=lost
        )
    new = _rebuild(world, dead)
    log.debug(
        "shrink epoch=%d failed=%s nC=%d nR=%d", new.epoch, sorted(dead), new.nC, new.nR
    )
    return new


def respawn(
    world: WorldView,
    failed: Iterable[ProcessId],
    spawn: Callable[[int], ProcessId],
) -> WorldView:
    """
    Like shrink, but logical ranks that lost every copy get a fresh process.

    `spawn(rank)` must return a uid never used before in this job.
    """
    dead = {uid for uid in failed if world.contains(uid)}
    new = _rebuild(world, dead, spawn)
    log.debug("respawn epoch=%d failed=%s nC=%d nR=%d", new.epoch, sorted(dead), new.nC, new.nR)
    return new


def promote(world: WorldView, failed_cmp_logical_rank: int) -> WorldView:
    """
    Hand logical rank `failed_cmp_logical_rank` to its replica.

    The former computational process leaves the world and the event counts
    as a replica loss from here on.

    Raises:
        RoutingError: If the rank is out of range.
        UnrecoverableWorldError: If the rank has no live replica.
    """
    if not 0 <= failed_cmp_logical_rank < world.nC:
        raise RoutingError(f"logical rank {failed_cmp_logical_rank} outside 0..{world.nC - 1}")
    if not world.has_replica(failed_cmp_logical_rank):
        raise UnrecoverableWorldError(
            f"rank {failed_cmp_logical_rank} has no replica to promote",
            lost_ranks=(failed_cmp_logical_rank,),
        )
    return shrink(world, {world.cmp_group[failed_cmp_logical_rank]})


def route(world: WorldView, logical_rank: int, side: Side | str) -> Optional[ProcessId]:
    """
    Resolve a logical rank to the uid serving it on `side` (None if unreplicated).

    Raises:
        RoutingError: For ranks outside 0..nC-1.
    """
    if not 0 <= logical_rank < world.nC:
        raise RoutingError(f"logical rank {logical_rank} outside 0..{world.nC - 1}")
    if Side(side) is Side.CMP:
        return world.cmp_group[logical_rank]
    return world.rep_group[logical_rank] if world.has_replica(logical_rank) else None


__all__ = [
    "ProcessId",
    "Side",
    "Role",
    "Bridge",
    "WorldView",
    "build_world",
    "shrink",
    "respawn",
    "lost_ranks",
    "promote",
    "route",
    "moved_replicas",
    "promoted_replicas",
]
