# tests/test_simnet.py
from __future__ import annotations

import json

import pytest

from ftsim.core.errors import JobAborted, SchedulingError
from ftsim.core.schemas import SimConfig
from ftsim.core.simnet import (
    CoordinatorNetwork,
    NativeTransport,
    Observation,
    SimNet,
    Simulator,
    coordinator_broadcast_checkpoint,
    observe_failures,
)


def _replay(payloads, trace_path=None):
    sim = Simulator(trace_path=trace_path)
    seen = []
    sim.on("tick", lambda ev: seen.append((ev.time, ev.payload["n"])))
    for t, n in payloads:
        sim.schedule("tick", t, n=n)
    sim.run()
    sim.close()
    return sim, seen


def test_equal_times_dispatch_in_schedule_order():
    _, seen = _replay([(2.0, "b"), (1.0, "a"), (2.0, "c"), (2.0, "d")])
    assert seen == [(1.0, "a"), (2.0, "b"), (2.0, "c"), (2.0, "d")]


def test_schedule_in_the_past_raises(sim):
    sim.on("tick", lambda ev: None)
    sim.schedule("tick", 5.0)
    sim.run()
    assert sim.now == 5.0
    with pytest.raises(SchedulingError):
        sim.schedule("tick", 4.0)


def test_cancelled_events_do_not_dispatch(sim):
    seen = []
    sim.on("tick", lambda ev: seen.append(ev.seq))
    keep = sim.schedule("tick", 1.0)
    drop = sim.schedule("tick", 2.0)
    assert sim.cancel(drop)
    assert not sim.cancel(drop)
    assert sim.event_time(keep) == 1.0
    sim.run()
    assert seen == [keep]
    assert sim.dispatched == 1


def test_run_until_stops_clock(sim):
    sim.on("tick", lambda ev: None)
    sim.schedule("tick", 10.0)
    sim.run(until=3.0)
    assert sim.now == 3.0
    assert len(sim.pending("tick")) == 1


def test_missing_handler_raises(sim):
    sim.schedule("unknown", 1.0)
    with pytest.raises(KeyError):
        sim.run()


def test_trace_hash_is_deterministic(tmp_path):
    events = [(0.5, 1), (0.5, 2), (1.5, 3)]
    a, _ = _replay(events, trace_path=tmp_path / "trace.ndjson")
    b, _ = _replay(events)
    c, _ = _replay([(0.5, 1), (0.5, 2), (1.5, 4)])
    assert a.trace_hash == b.trace_hash
    assert a.trace_hash != c.trace_hash
    lines = (tmp_path / "trace.ndjson").read_text(encoding="utf-8").splitlines()
    assert [json.loads(line)["n"] for line in lines] == [1, 2, 3]


def test_transport_keeps_pair_fifo(sim):
    net = NativeTransport(sim, latency_base_s=1e-6, latency_per_byte_s=1e-3)
    for uid in (0, 1):
        net.register(uid)
    fields = dict(src_uid=0, dst_uid=1, src_rank=0, dst_rank=1, kind="p2p", tag=0, epoch=0, payload=None)
    net.isend(net.new_envelope(send_id=1, nbytes=1000, **fields))
    net.isend(net.new_envelope(send_id=2, nbytes=1, **fields))
    sim.run()
    assert [env.send_id for env in net.iprobe(1)] == [1, 2]
    assert net.blocking_calls() == 0


def test_failure_propagates_through_hierarchy():
    coords = CoordinatorNetwork(4, groups=2, hop_s=1.0)
    assert coords.leaders == [0, 2]
    coords.add_member(7, 3)
    done = coords.propagate_failure(Observation(uid=7, time=0.0, node=3), {7}, now=0.0)
    # node 3 -> leader 2 -> primary 0 -> node 1
    assert done == 5.0
    assert {c.node_id: c.known_dead[7] for c in coords.coordinators} == {0: 3.0, 1: 4.0, 2: 2.0, 3: 1.0}
    assert coords.messages == 3
    assert coords.broadcast_checkpoint(now=10.0) == 13.0


@pytest.mark.parametrize("n_nodes, node, expected", [(16, 5, 8), (64, 9, 16)])
def test_failure_messages_grow_with_group_count(n_nodes, node, expected):
    coords = CoordinatorNetwork(n_nodes, hop_s=1.0)
    coords.add_member(100, node)
    coords.propagate_failure(Observation(uid=100, time=0.0, node=node), {100}, now=0.0)
    assert coords.messages == expected
    assert coords.messages <= 2 * coords.n_groups + 2
    assert all(100 in c.known_dead for c in coords.coordinators)


def test_ambiguous_observation_polls_members():
    coords = CoordinatorNetwork(1)
    for uid in (0, 1, 2):
        coords.add_member(uid, 0)
    dead = coords.primary.resolve(Observation(uid=None, time=0.0, node=0), lambda uid: uid != 1)
    assert dead == {1}
    assert coords.primary.polls == 3


def test_simnet_kill_is_observed_after_propagation():
    net = SimNet(SimConfig(cores_per_node=2, coord_hop_s=0.5), n_processes=4)
    for uid in range(4):
        net.add_process(uid, uid // 2)
    net.sim.on("tick", lambda ev: None)

    obs = net.kill_process(3)
    assert obs is not None and obs.detected_at > 0
    assert net.interception.suppressed_observations == [obs]
    assert observe_failures(net, 0) == set()
    assert net.kill_process(3) is None

    net.schedule("tick", obs.detected_at)
    net.sim.run()
    assert observe_failures(net, 0) == {3}
    assert coordinator_broadcast_checkpoint(net) > net.now


def test_future_kill_schedules_event():
    net = SimNet(SimConfig(), n_processes=2)
    for uid in range(2):
        net.add_process(uid, 0)
    assert net.kill_process(1, at=5.0) is None
    assert [ev.payload for ev in net.sim.pending("kill")] == [{"uid": 1}]


def test_disabled_interception_aborts():
    net = SimNet(SimConfig(), n_processes=2, interception=False)
    for uid in range(2):
        net.add_process(uid, 0)
    with pytest.raises(JobAborted):
        net.kill_process(1)
    assert net.transport.aborts == 1


def test_enabled_interception_drops_messages_to_dead():
    net = SimNet(SimConfig(), n_processes=2)
    for uid in range(2):
        net.add_process(uid, 0)
    net.kill_process(1)
    env = net.transport.new_envelope(
        src_uid=0, dst_uid=1, src_rank=0, dst_rank=1, kind="p2p", send_id=1, tag=0, epoch=0, payload=None, nbytes=0
    )
    net.transport.isend(env)
    assert net.interception.dropped_to_dead == 1
    assert net.transport.in_flight() == 0
