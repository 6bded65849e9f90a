# tests/test_failure.py
from __future__ import annotations

import itertools

import numpy as np
import pytest

from ftsim.core.errors import ConfigError
from ftsim.core.failure import (
    Classification,
    FailureEvent,
    FailureInjector,
    FailureModel,
    classify,
    classify_and_account,
    load_failure_schedule,
    repair_world,
    sample_failure_schedule,
)
from ftsim.utils.config import CONFIGS_DIR


def test_system_mtbf_scales_with_cores():
    big = FailureModel.from_system(2000.0, 8192)
    assert big.per_core_mtbf == 2000.0 * 8192
    assert FailureModel(big.per_core_mtbf, 4096).system_mtbf == pytest.approx(4000.0)
    assert FailureModel(big.per_core_mtbf, 1024).system_mtbf == pytest.approx(16000.0)


@pytest.mark.parametrize("kwargs", [dict(per_core_mtbf=0, core_count=4), dict(per_core_mtbf=10, core_count=0),
                                    dict(per_core_mtbf=10, core_count=4, shape=0)])
def test_failure_model_rejects_bad_parameters(kwargs):
    with pytest.raises(ValueError):
        FailureModel(**kwargs)


@pytest.mark.parametrize("shape", [0.7, 1.0])
def test_mean_gap_matches_system_mtbf(shape):
    model = FailureModel.from_system(500.0, 64, shape=shape, seed=11)
    times = np.array([ev.time for ev in itertools.islice(model.events(), 100_000)])
    gaps = np.diff(np.concatenate([[0.0], times]))
    assert gaps.mean() == pytest.approx(500.0, rel=0.02)


def test_models_differing_in_mtbf_share_draws():
    a = [ev for ev in itertools.islice(FailureModel.from_system(100.0, 8, seed=3).events(), 20)]
    b = [ev for ev in itertools.islice(FailureModel.from_system(200.0, 8, seed=3).events(), 20)]
    assert [2 * x.time for x in a] == pytest.approx([y.time for y in b])
    assert [x.selector for x in a] == [y.selector for y in b]


def test_sample_failure_schedule_stops_at_horizon():
    model = FailureModel.from_system(10.0, 4, seed=1)
    events = sample_failure_schedule(model, 200.0)
    assert events
    assert all(ev.time <= 200.0 for ev in events)
    assert all(ev.victim is None for ev in events)
    assert [ev.time for ev in events] == sorted(ev.time for ev in events)
    with pytest.raises(ValueError):
        sample_failure_schedule(model, 0)


def test_load_failure_schedule_shipped_file():
    events = load_failure_schedule(CONFIGS_DIR / "failures.schedule")
    assert [(e.time, e.selector) for e in events] == [(300.0, 0.10), (900.0, 0.55), (1500.0, 0.90)]


def test_load_failure_schedule_sorts_and_skips_comments(tmp_path):
    path = tmp_path / "f.schedule"
    path.write_text("# header\n\n50 0.5\n10 0.0\n", encoding="utf-8")
    assert [e.time for e in load_failure_schedule(path)] == [10.0, 50.0]


@pytest.mark.parametrize("body", ["10\n", "ten 0.1\n", "-1 0.1\n", "10 1.0\n", "10 -0.2\n"])
def test_load_failure_schedule_rejects_malformed(tmp_path, body):
    path = tmp_path / "bad.schedule"
    path.write_text(body, encoding="utf-8")
    with pytest.raises(ConfigError):
        load_failure_schedule(path)


def test_load_failure_schedule_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_failure_schedule(tmp_path / "nope.schedule")


def test_pick_victim_uses_sorted_live_set():
    injector = FailureInjector([FailureEvent(1.0, 0.0), FailureEvent(2.0, 0.99), FailureEvent(3.0, 0.5)])
    live = [5, 1, 3, 2]
    assert injector.pick_victim(injector.next_event(), live) == 1
    assert injector.pick_victim(injector.next_event(), live) == 5
    assert injector.pick_victim(injector.next_event(), live) == 3
    assert injector.next_event() is None
    assert [e.victim for e in injector.fired] == [1, 5, 3]
    assert injector.pick_victim(FailureEvent(4.0, 0.1), []) is None


def test_classify(world_4_2):
    assert classify(world_4_2, {4}) == {4: Classification.REPLICA_DEATH}
    assert classify(world_4_2, {1}) == {1: Classification.PROMOTED}
    assert classify(world_4_2, {0, 4, 2}) == {
        0: Classification.UNRECOVERABLE,
        2: Classification.UNRECOVERABLE,
        4: Classification.UNRECOVERABLE,
    }


def test_repair_world_promotes_and_reports_loss(world_4_2):
    outcome = repair_world(world_4_2, {0, 99})
    assert outcome.recoverable
    assert outcome.world.cmp_group == (4, 1, 2, 3)
    assert outcome.classifications == {0: Classification.PROMOTED}

    lost = repair_world(world_4_2, {3})
    assert not lost.recoverable
    assert lost.lost == (3,)
    assert lost.classifications[3] is Classification.UNRECOVERABLE


class _Ledger:
    def __init__(self) -> None:
        self.failures = []

    def record_failure(self, classification):
        self.failures.append(classification)

    def regress(self):
        return 12.5


def test_classify_and_account():
    ledger = _Ledger()
    ev = FailureEvent(1.0, 0.3, victim=2)
    assert classify_and_account(ev, Classification.REPLICA_DEATH, ledger) == 0.0
    assert ev.classification is Classification.REPLICA_DEATH
    assert classify_and_account(ev, Classification.UNRECOVERABLE, ledger, rollback=True) == 12.5
    assert ledger.failures == [Classification.REPLICA_DEATH, Classification.UNRECOVERABLE]
