# tests/test_topology.py
from __future__ import annotations

import itertools

import pytest

from ftsim.core.errors import RoutingError, TopologyConstructionError, UnrecoverableWorldError
from ftsim.core.topology import (
    Side,
    build_world,
    lost_ranks,
    moved_replicas,
    promote,
    promoted_replicas,
    respawn,
    route,
    shrink,
)

LAYOUTS = [(N, M) for N in range(1, 5) for M in range(0, N + 1)]


def _subsets(items):
    for k in range(len(items) + 1):
        yield from itertools.combinations(items, k)


def test_build_world_layout(world_4_2):
    assert world_4_2.cmp_group == (0, 1, 2, 3)
    assert world_4_2.rep_group == (4, 5)
    assert world_4_2.cmp_no_rep_group == (2, 3)
    assert world_4_2.replica_map == {0: 4, 1: 5}
    assert world_4_2.copies(1) == (1, 5)
    assert world_4_2.copies(3) == (3,)
    assert world_4_2.cmp_no_rep_bridge.remote == (4, 5)
    world_4_2.check_invariants()


@pytest.mark.parametrize("N, M, uids", [(0, 0, []), (2, 3, list(range(5))), (2, 1, [0, 1]), (2, 0, [7, 7])])
def test_build_world_rejects_bad_layouts(N, M, uids):
    with pytest.raises(TopologyConstructionError):
        build_world(N, M, uids)


def test_responsible_sender(world_4_2):
    # replica receivers hear from replicas when the source has one
    assert world_4_2.responsible_sender(0, 5) == 4
    # and from the computational copy otherwise
    assert world_4_2.responsible_sender(3, 5) == 3
    assert world_4_2.responsible_sender(0, 2) == 0
    with pytest.raises(RoutingError):
        world_4_2.responsible_sender(0, 99)


@pytest.mark.parametrize("N, M", LAYOUTS)
def test_shrink_exhaustive(N, M):
    world = build_world(N, M, list(range(N + M)))
    for failed in _subsets(world.world):
        dead = set(failed)
        lost = lost_ranks(world, dead)
        if lost:
            with pytest.raises(UnrecoverableWorldError) as err:
                shrink(world, dead)
            assert err.value.lost_ranks == lost
            continue
        after = shrink(world, dead)
        after.check_invariants()
        assert after.epoch == world.epoch + 1
        assert after.nC == N
        assert not dead & set(after.world)
        # every survivor keeps running the same logical rank, or a promoted/moved replica
        for uid in after.world:
            assert world.contains(uid)
        promoted = promoted_replicas(world, after)
        for uid, rank in promoted.items():
            assert world.role_of(uid).logical_rank == rank
            assert world.cmp_group[rank] in dead
        moved = moved_replicas(world, after)
        for uid, rank in moved.items():
            assert after.role_of(uid).is_replica and rank < after.nR
        assert after.nR == M - len([u for u in world.rep_group if u in dead]) - len(promoted)


@pytest.mark.parametrize("N, M", LAYOUTS)
def test_shrink_is_idempotent(N, M):
    world = build_world(N, M, list(range(N + M)))
    for failed in _subsets(world.world):
        dead = set(failed)
        if lost_ranks(world, dead):
            continue
        once = shrink(world, dead)
        twice = shrink(once, dead)
        assert twice.cmp_group == once.cmp_group
        assert twice.rep_group == once.rep_group


def test_promote_hands_rank_to_replica(world_4_2):
    after = promote(world_4_2, 1)
    assert after.cmp_group == (0, 5, 2, 3)
    assert after.rep_group == (4,)
    with pytest.raises(UnrecoverableWorldError):
        promote(world_4_2, 3)
    with pytest.raises(RoutingError):
        promote(world_4_2, 9)


def test_replica_death_repacks_prefix():
    world = build_world(4, 3, list(range(7)))
    after = shrink(world, {4})
    assert after.rep_group == (6, 5)
    assert moved_replicas(world, after) == {6: 0}


def test_respawn_refills_lost_ranks():
    world = build_world(3, 1, list(range(4)))
    fresh = iter(range(100, 110))
    after = respawn(world, {0, 3, 2}, lambda rank: next(fresh))
    assert after.cmp_group == (100, 1, 101)
    assert after.rep_group == ()
    after.check_invariants()


def test_route(world_4_2):
    assert route(world_4_2, 2, Side.CMP) == 2
    assert route(world_4_2, 1, "rep") == 5
    assert route(world_4_2, 3, "rep") is None
    with pytest.raises(RoutingError):
        route(world_4_2, 4, "cmp")
