# tests/test_job.py
from __future__ import annotations

import numpy as np
import pytest

from conftest import failure_free_checksum, run_job, small_config
from ftsim.bench.apps import APPS, stencil_reference
from ftsim.bench.campaign import build_app_for, run_campaign
from ftsim.bench.job import Job, failure_seed
from ftsim.core.checkpoint import CheckpointStore
from ftsim.core.failure import Classification, FailureEvent

LAYOUTS = [
    ("plain", 4, 0),
    ("ckpt", 4, 0),
    ("repl", 6, 2),
    ("repl", 8, 4),
    ("combined", 6, 2),
]


def _config(mode, cores, M, **overrides):
    tau = 15.0 if mode in ("ckpt", "combined") else None
    return small_config(mode=mode, cores=cores, replicas=M, tau=tau, **overrides)


def _assert_buckets(result):
    m = result.metrics
    assert m.bucket_sum() == pytest.approx(m.total_s, rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("app", sorted(APPS))
@pytest.mark.parametrize("mode, cores, M", LAYOUTS)
def test_failure_free_matches_plain(app, mode, cores, M):
    config = _config(mode, cores, M, app=app)
    job, result = run_job(config)
    assert result.finished and not result.aborted
    assert result.steps == config.total_steps
    assert result.checksum == failure_free_checksum(config)
    assert result.audit.ok
    assert result.failures == result.rollbacks == 0
    if mode in ("ckpt", "combined"):
        assert result.waves >= 1
    _assert_buckets(result)


def test_stencil_matches_sequential_reference():
    config = small_config(mode="plain")
    job, result = run_job(config)
    assert result.finished
    expected = stencil_reference(config.n_ranks, config.cells_per_rank, config.total_steps)
    for got, want in zip(job.final_states(), expected, strict=True):
        np.testing.assert_array_equal(got["u"], want["u"])
        assert got["residual"] == want["residual"]


@pytest.mark.parametrize(
    "mode, cores, M, victim, repairs, rollbacks, classification",
    [
        ("ckpt", 4, 0, 1, 0, 1, Classification.UNRECOVERABLE),
        ("repl", 6, 2, 0, 1, 0, Classification.PROMOTED),
        ("repl", 6, 2, 4, 1, 0, Classification.REPLICA_DEATH),
        ("repl", 6, 2, 3, 0, 1, Classification.UNRECOVERABLE),
        ("combined", 6, 2, 3, 0, 1, Classification.UNRECOVERABLE),
        ("combined", 6, 2, 1, 1, 0, Classification.PROMOTED),
    ],
)
def test_single_kill_keeps_result(mode, cores, M, victim, repairs, rollbacks, classification):
    config = _config(mode, cores, M)
    job, result = run_job(config, setup=lambda j: j.kill_at(victim, 25.0))
    assert result.finished
    assert result.failures == 1
    assert (result.repairs, result.rollbacks) == (repairs, rollbacks)
    assert job.failure_events[0].classification is classification
    assert result.checksum == failure_free_checksum(config)
    assert result.audit.ok
    _assert_buckets(result)
    if rollbacks:
        assert result.metrics.rollback_s > 0


def test_replica_death_keeps_width():
    config = _config("repl", 6, 2)
    job, result = run_job(config, setup=lambda j: j.kill_at(5, 25.0))
    assert job.world.nC == 4
    assert job.world.nR == 1
    assert result.finished


def test_plain_mode_aborts_on_failure():
    config = small_config(mode="plain")
    _, result = run_job(config, setup=lambda j: j.kill_at(1, 15.0))
    assert result.aborted
    assert not result.finished
    assert result.steps < config.total_steps


def test_trace_hash_is_deterministic():
    config = small_config(mode="combined", cores=6, replicas=2, mtbf=15.0)
    _, a = run_job(config, seed=3)
    _, b = run_job(config, seed=3)
    _, c = run_job(config, seed=4)
    assert a.trace_hash == b.trace_hash
    assert a.checksum == b.checksum
    assert a.events == b.events
    assert a.trace_hash != c.trace_hash


def test_failure_seed_is_stable():
    assert failure_seed(0, 1) == failure_seed(0, 1)
    assert failure_seed(0, 1) != failure_seed(0, 2)
    assert failure_seed(0, 1) != failure_seed(1, 1)


def test_replication_halves_failure_free_efficiency():
    config = small_config(mode="repl", cores=8, replicas=4)
    (record,) = run_campaign(config)
    assert record.metrics.efficiency == pytest.approx(0.5, rel=0.01)
    assert record.metrics.redundant_work_s == pytest.approx(record.metrics.useful_work_s, rel=0.01)


# particle_like runs every collective kind, so each one is replayed across a kill
@pytest.mark.parametrize("mode, cores, M", [("ckpt", 2, 0), ("repl", 4, 2)])
@pytest.mark.parametrize("app", ["stencil_halo", "particle_like"])
def test_kill_after_every_event(app, mode, cores, M):
    config = small_config(app=app, mode=mode, cores=cores, replicas=M, steps=8, tau=15.0 if mode == "ckpt" else None)
    expected = failure_free_checksum(config)
    _, clean = run_job(config)
    if mode == "ckpt":
        assert clean.waves >= 3

    for index in range(1, clean.events + 1):
        job, result = run_job(config, setup=lambda j, i=index: j.kill_after_event(i, uid=i % cores))
        assert result.finished, f"kill after event {index}"
        assert result.checksum == expected, f"kill after event {index}"
        assert result.audit.ok, f"kill after event {index}"
        if mode == "repl":
            assert result.rollbacks == 0


def test_late_kill_after_other_copies_finished():
    config = small_config(mode="repl", cores=4, replicas=2, steps=8)
    expected = failure_free_checksum(config)
    _, clean = run_job(config)
    for index in range(clean.events - 10, clean.events + 1):
        for uid in range(4):
            _, result = run_job(config, setup=lambda j, i=index, u=uid: j.kill_after_event(i, uid=u))
            assert result.finished, f"kill uid {uid} after event {index}"
            assert result.checksum == expected


def test_checkpoint_timer_is_periodic():
    config = small_config(mode="ckpt", steps=12, tau=25.0)
    job, result = run_job(config)
    assert result.finished
    assert len(job.wave_starts) >= 3
    np.testing.assert_allclose(np.diff(job.timer_fires), config.tau)
    for start in job.wave_starts:
        waited = min(start - fire for fire in job.timer_fires if fire <= start)
        assert 0.0 <= waited <= config.seconds_per_step + 1.0


def test_given_up_job_releases_observations():
    # a failure every 15 s never lets a 20 s job without checkpoints finish
    config = small_config(mode="ckpt", steps=2)
    schedule = [FailureEvent(time=15.0 * k, selector=0.0) for k in range(1, 400)]
    job, result = run_job(config, schedule=schedule)
    assert result.aborted and not result.finished
    assert result.rollbacks > 0
    assert job.net.interception.suppressed_observations == []


def test_restart_from_committed_wave(tmp_path):
    config = _config("ckpt", 4, 0)
    store = CheckpointStore.at(tmp_path / "store")
    job = Job(build_app_for(config), config, store=store)
    partial = job.run(until=45.0)
    assert not partial.finished
    assert partial.waves >= 1
    marker = store.latest()

    resumed = Job.from_store(build_app_for(config), config, CheckpointStore.at(tmp_path / "store"))
    assert resumed.incarnation == marker.incarnation + 1
    assert min(vp.step for vp in resumed.processes.values()) > 0
    result = resumed.run()
    assert result.finished
    assert result.restarts == 1
    assert result.checksum == failure_free_checksum(config)


@pytest.mark.parametrize("M", [0, 2, 4])
def test_restart_with_any_replica_count(tmp_path, M):
    config = _config("ckpt", 4, 0)
    store = CheckpointStore.at(tmp_path)
    Job(build_app_for(config), config, store=store).run(until=45.0)

    wider = small_config(mode="combined" if M else "ckpt", cores=4 + M, replicas=M)
    job = Job.from_store(build_app_for(wider), wider, store)
    assert job.world.nR == M
    result = job.run()
    assert result.finished
    assert result.checksum == failure_free_checksum(config)


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("mode, cores, M", [("ckpt", 4, 0), ("repl", 8, 4), ("combined", 6, 2)])
@pytest.mark.parametrize("app", sorted(APPS))
def test_sampled_failures_keep_result(app, mode, cores, M, seed):
    config = small_config(app=app, mode=mode, cores=cores, replicas=M, mtbf=120.0)
    _, result = run_job(config, seed=seed)
    assert result.finished
    assert result.checksum == failure_free_checksum(config)
    assert result.audit.ok
    _assert_buckets(result)


# ----- randomized oracle over every small layout -----

ORACLE_LAYOUTS = [(N, M) for N in range(1, 5) for M in range(0, N + 1)]


def _random_schedule(seed, horizon=60.0):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 4))
    times = np.sort(rng.uniform(1.0, horizon, size=k))
    return [FailureEvent(time=float(t), selector=float(s)) for t, s in zip(times, rng.random(k))]


def _oracle(app, N, M, seeds):
    for seed in seeds:
        mode = "ckpt" if M == 0 else ("combined" if seed % 2 else "repl")
        config = small_config(app=app, mode=mode, cores=N + M, replicas=M, tau=12.0 if mode != "repl" else None)
        expected = failure_free_checksum(config)
        _, result = run_job(config, schedule=_random_schedule(seed))
        assert result.finished, f"{app} N={N} M={M} seed={seed}"
        assert result.checksum == expected, f"{app} N={N} M={M} seed={seed}"
        assert result.audit.ok, f"{app} N={N} M={M} seed={seed}"
        _assert_buckets(result)


@pytest.mark.parametrize("N, M", ORACLE_LAYOUTS)
@pytest.mark.parametrize("app", sorted(APPS))
def test_random_schedules_quick(app, N, M):
    _oracle(app, N, M, range(3))


@pytest.mark.slow
@pytest.mark.parametrize("N, M", ORACLE_LAYOUTS)
@pytest.mark.parametrize("app", sorted(APPS))
def test_random_schedules_full(app, N, M):
    _oracle(app, N, M, range(3, 203))
