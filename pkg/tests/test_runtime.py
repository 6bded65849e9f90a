# tests/test_runtime.py
from __future__ import annotations

import numpy as np
import pytest

from ftsim.core.errors import CollectiveMismatchError, LogGapError, RoutingError
from ftsim.core.runtime import IdSet, Runtime, combine
from ftsim.core.topology import build_world


def _runtimes(world, transport):
    out = {}
    for uid in world.world:
        transport.register(uid)
        out[uid] = Runtime(uid, world, transport)
    return out


@pytest.fixture
def world_2_1():
    """Rank 0 has replica uid 2; rank 1 has none."""
    return build_world(2, 1, [0, 1, 2])


def test_idset_floor_advances():
    ids = IdSet()
    assert ids.add(2)
    assert ids.floor == 0 and ids.extras == {2}
    assert ids.add(1)
    assert ids.floor == 2 and not ids.extras
    assert not ids.add(1)
    ids.add(5)
    assert ids.ids_above(1) == {2, 5}
    assert ids.top() == 5


def test_isend_routes_through_replica_map(world_2_1, transport, sim):
    rts = _runtimes(world_2_1, transport)
    # unreplicated sender reaches both copies of rank 0
    send = rts[1].isend(0, "hello")
    assert send.cmp_subreq is not None and send.rep_subreq is not None
    # replicated sender only reaches the computational copy of rank 1
    assert rts[0].isend(1, "x").rep_subreq is None
    # replica sender towards an unreplicated rank sends nothing
    rts[2].isend(1, "x")
    assert rts[2].stats["skipped_sends"] == 1
    with pytest.raises(RoutingError):
        rts[0].isend(5, "x")

    sim.run()
    for uid in (0, 2):
        recv = rts[uid].irecv(1)
        assert rts[uid].test(recv)
        assert recv.result == "hello"


def test_receive_completes_after_delivery(world_2_1, transport, sim):
    rts = _runtimes(world_2_1, transport)
    recv = rts[1].irecv(0, tag=3)
    assert not rts[1].test(recv)
    assert not rts[1].test(recv)
    rts[0].isend(1, np.arange(4.0), tag=3)
    sim.run()
    assert rts[1].test(recv)
    np.testing.assert_array_equal(recv.result, np.arange(4.0))
    assert recv.cmp_subreq.polls >= 3


def test_tags_match_out_of_order(world_2_1, transport, sim):
    rts = _runtimes(world_2_1, transport)
    rts[0].isend(1, "first", tag=1)
    rts[0].isend(1, "second", tag=2)
    sim.run()
    late = rts[1].irecv(0, tag=2)
    early = rts[1].irecv(0, tag=1)
    assert rts[1].test(late) and rts[1].test(early)
    assert (early.result, late.result) == ("first", "second")


def test_duplicate_is_suppressed(world_2_1, transport, sim):
    rts = _runtimes(world_2_1, transport)
    rts[0].isend(1, "once")
    sim.run()
    first = rts[1].irecv(0)
    assert rts[1].test(first)

    rts[0].resend(1, [1], 1)
    sim.run()
    again = rts[1].irecv(0)
    assert not rts[1].test(again)
    assert rts[1].stats["suppressed"] == 1
    assert rts[1].stats["consumed"] == 1


def test_drained_chunks_are_matched_first(world_2_1, transport, sim):
    rts = _runtimes(world_2_1, transport)
    rts[0].isend(1, "in flight")
    assert transport.in_flight() == 1
    transport.flush(deliver=True)
    chunks = rts[1].drain_inflight()
    assert [c.send_id for c in chunks] == [1]
    consumed, held = rts[1].received_ids(0)
    assert held == {1} and consumed.top() == 0

    recv = rts[1].irecv(0)
    assert rts[1].test(recv)
    assert recv.result == "in flight"
    assert rts[1].stats["from_drained"] == 1


def test_allreduce_across_groups(world_2_1, transport, sim):
    rts = _runtimes(world_2_1, transport)
    values = {0: 1.0, 1: 2.0, 2: 1.0}
    handles = {uid: rts[uid].collective("allreduce", values[uid], op="sum") for uid in rts}
    sim.run()
    for uid, handle in handles.items():
        assert rts[uid].test(handle)
        assert handle.result == 3.0
        assert rts[uid].completed_upto == 1
        assert rts[uid].collective_completed(1)


def test_collective_mismatch_raises(transport):
    world = build_world(2, 0, [0, 1])
    rts = _runtimes(world, transport)
    rts[0].collective("allreduce", 1, op="sum")
    with pytest.raises(CollectiveMismatchError):
        rts[1].collective("allreduce", 1, op="max")
    with pytest.raises(ValueError):
        rts[0].collective("reduce_scatter", 1)


@pytest.mark.parametrize(
    "kind, params, contributions, rank, expected",
    [
        ("allgather", {}, [1, 2, 3], 0, [1, 2, 3]),
        ("allreduce", {"op": "max"}, [1, 7, 3], 2, 7),
        ("bcast", {"root": 1}, [None, "v", None], 0, "v"),
        ("gather", {"root": 0}, [1, 2], 0, [1, 2]),
        ("gather", {"root": 0}, [1, 2], 1, None),
        ("scatter", {"root": 0}, [["a", "b"], None], 1, "b"),
        ("alltoall", {}, [[1, 2], [3, 4]], 1, [2, 4]),
        ("barrier", {}, [None, None], 0, None),
    ],
)
def test_combine(kind, params, contributions, rank, expected):
    assert combine(kind, params, contributions, rank) == expected


def test_log_trim_drops_stable_entries(world_2_1, transport):
    rts = _runtimes(world_2_1, transport)
    rt = rts[0]
    for i in range(3):
        rt.isend(1, np.zeros(8) + i)
    before = rt.log_bytes
    assert rt.trim_logs(before + 1) == 0

    rt.mark_stable({1: 2}, 0)
    freed = rt.trim_logs(0)
    assert freed == 2 * 64
    assert rt.log_bytes == before - freed
    assert rt.log_floor[1] == 2
    with pytest.raises(LogGapError):
        rt.resend(1, [1], 1)
    assert rt.resend(1, [3], 1) == 64


def test_snapshot_and_restore_state(world_2_1, transport, sim):
    rts = _runtimes(world_2_1, transport)
    rts[0].isend(1, "a")
    rts[0].isend(1, "b")
    rts[1].collective("barrier")
    sim.run()
    rts[1].test(rts[1].irecv(0))
    state = rts[1].snapshot_state()
    assert state["consumed"] == {"0": {"floor": 1, "extras": []}}
    assert state["coll_seq"] == 1

    fresh = Runtime(1, world_2_1, transport)
    fresh.restore_state(state, world_2_1)
    assert fresh.consumed[0].floor == 1
    assert fresh.coll_seq == fresh.completed_upto == 1
    assert fresh.send_log == {} and fresh.log_bytes == 0
