# src/ftsim/bench/job.py
"""
One simulated job from start to finish.

The Job owns the SimNet, the virtual processes, the checkpoint store and the
time ledger. It turns simulator events into process progress, failures into
repairs or rollbacks, and checkpoint timer ticks into quiesce + waves.

Events handled (payload in parentheses):
    wake(uid)              resume a process
    failure()              next sampled/scheduled failure fires
    kill(uid)              scripted kill
    notify(uids)           coordinators told every process about deaths
    repair()               batched repair of everything notified so far
    restore()              rollback switches from rebuild to state reload
    resume()               end of a stop-the-world phase
    ckpt_timer()           primary coordinator's timer expired
    ckpt_request(seq)      request reached every process
    record_landed(seq, rank), marker_commit(seq)
"""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Set

import numpy as np

from ..core.checkpoint import (
    CheckpointPolicy,
    CheckpointRecord,
    CheckpointStore,
    QuiesceToken,
    RestartPlan,
    quiesce,
    records_for,
    restart_job,
    rollback_restore,
    snapshot_wave,
    write_baseline,
)
from ..core.errors import FtsimError, JobAborted, LogGapError
from ..core.failure import (
    Classification,
    FailureEvent,
    FailureInjector,
    FailureModel,
    classify,
    classify_and_account,
    load_failure_schedule,
    recover_messages,
    repair_world,
)
from ..core.runtime import (
    BLOCKED,
    ComputeUntil,
    Directive,
    LogTrim,
    Runtime,
    SafePoint,
    VirtualProcess,
    clone_process,
    drive,
)
from ..core.schemas import CampaignConfig, DeliveryAudit, LatestMarker, Metrics
from ..core.simnet import SimEvent, SimNet
from ..core.topology import ProcessId, build_world, moved_replicas, respawn
from .apps import MiniApp
from .metrics import Phase, TimeLedger

log = logging.getLogger(__name__)

# communicators rebuilt per repair: world, cmp, rep, cmp_no_rep and two bridges
GROUPS_PER_REPAIR = 6
# give up when the job runs this many times longer than failure-free
STALL_FACTOR = 200.0


@dataclass
class RunResult:
    finished: bool
    aborted: bool
    steps: int
    checksum: str
    trace_hash: str
    metrics: Metrics
    audit: DeliveryAudit
    events: int
    counts: Dict[str, int] = field(default_factory=dict)
    failures: int = 0
    repairs: int = 0
    rollbacks: int = 0
    restarts: int = 0
    waves: int = 0


def failure_seed(root_seed: int, run_seed: int) -> int:
    """Stable per-run seed derived from the root seed."""
    return int(np.random.SeedSequence(entropy=root_seed, spawn_key=(run_seed,)).generate_state(1)[0])


class Job:
    """
    Parameters
    ----------
    app : MiniApp
        Program every logical rank runs.
    config : CampaignConfig
        Layout, mode, failure and checkpoint parameters.
    seed : int
        Run seed (failure sampling).
    store : Optional[CheckpointStore]
        Checkpoint store; a fresh in-memory one by default.
    schedule : Optional[Sequence[FailureEvent]]
        Explicit failures replacing the sampled ones.
    trace_path : Optional[Path]
        Write the dispatched-event stream here as NDJSON.
    restart : Optional[RestartPlan]
        Resume from a stored wave instead of the initial state.
    """

    def __init__(
        self,
        app: MiniApp,
        config: CampaignConfig,
        *,
        seed: int = 0,
        store: Optional[CheckpointStore] = None,
        schedule: Optional[Sequence[FailureEvent]] = None,
        trace_path: Optional[Path] = None,
        restart: Optional[RestartPlan] = None,
    ) -> None:
        self.app = app
        self.config = config
        self.sim_config = config.sim
        self.mode = config.mode
        self.seed = seed
        self.total_steps = app.total_steps
        N, M = config.n_ranks, config.n_replicas
        self.N = N

        self.net = SimNet(self.sim_config, n_processes=config.cores, interception=self.mode != "plain", trace_path=trace_path)
        self.sim = self.net.sim
        self.transport = self.net.transport
        self.transport.on_arrival = self._on_arrival

        state_bytes = self.sim_config.state_bytes
        C = config.ckpt_cost or (N * state_bytes / self.sim_config.ckpt_bandwidth)
        self.bandwidth = N * state_bytes / C if state_bytes > 0 and C > 0 else self.sim_config.ckpt_bandwidth
        self.policy = CheckpointPolicy.derive(mu=config.effective_mtbf, C=C, mode=self.mode, tau=config.tau)
        self.store = store if store is not None else CheckpointStore()
        self.ledger = TimeLedger(config.cores)

        self.injector = self._build_injector(schedule)
        self._next_failure: Optional[FailureEvent] = None
        self.failure_events: List[FailureEvent] = []
        self._event_of: Dict[ProcessId, FailureEvent] = {}

        self.processes: Dict[ProcessId, VirtualProcess] = {}
        self.gens: Dict[ProcessId, Iterator[Directive]] = {}
        self.status: Dict[ProcessId, str] = {}
        self._wakes: Dict[ProcessId, Optional[int]] = {}
        self._remaining: Dict[ProcessId, float] = {}
        self.frozen = False
        self._resume_ev: Optional[int] = None
        self._restore_s = 0.0
        self._pending_failed: Set[ProcessId] = set()
        self._repair_ev: Optional[int] = None

        self._quiesce: Optional[QuiesceToken] = None
        self._wave_records: List[CheckpointRecord] = []
        self._wave_events: List[int] = []
        self._wave_seq = 0
        self._timer_ev: Optional[int] = None
        self._timer_fired_at: Optional[float] = None
        self.timer_fires: List[float] = []
        self.wave_starts: List[float] = []

        self.failures = self.repairs = self.rollbacks = self.restarts = self.waves = self.trims = 0
        self.finished = False
        self.aborted = False
        self.end_time: Optional[float] = None
        self._started = False

        if restart is None:
            self.incarnation = 0
            self.world = build_world(N, M, list(range(N + M)))
        else:
            self.incarnation = restart.incarnation
            self.world = restart.world
            self.restarts += 1
        self._next_uid = max(self.world.world) + 1
        for index, uid in enumerate(self.world.world):
            self.net.add_process(uid, index // self.sim_config.cores_per_node)
            rank = self.world.role_of(uid).logical_rank
            self._install(uid, app.init_state(rank, N), step=0)
        if restart is not None:
            for uid, record in records_for(restart).items():
                self._install(uid, copy.deepcopy(record.app_state), step=record.header.step, runtime_state=record.runtime_state)
        # the baseline of a restarted incarnation is the wave it resumed from
        if self.mode != "plain":
            write_baseline(self.store, self.world, self.processes, incarnation=self.incarnation)

        for kind, handler in (
            ("wake", self._on_wake),
            ("failure", self._on_failure),
            ("kill", self._on_kill),
            ("notify", self._on_notify),
            ("repair", self._on_repair),
            ("restore", self._on_restore),
            ("resume", self._on_resume),
            ("ckpt_timer", self._on_ckpt_timer),
            ("ckpt_request", self._on_ckpt_request),
            ("record_landed", self._on_record_landed),
            ("marker_commit", self._on_marker_commit),
        ):
            self.sim.on(kind, handler)

    @classmethod
    def from_store(cls, app: MiniApp, config: CampaignConfig, store: CheckpointStore, **kwargs) -> "Job":
        """Restart a stored job with `config`'s replica count."""
        plan = restart_job(store, config.n_ranks, config.n_replicas)
        return cls(app, config, store=store, restart=plan, **kwargs)

    # ----- setup helpers -----

    def _build_injector(self, schedule: Optional[Sequence[FailureEvent]]) -> Optional[FailureInjector]:
        if schedule is not None:
            return FailureInjector([copy.copy(ev) for ev in schedule])
        if self.config.schedule:
            return FailureInjector(load_failure_schedule(self.config.schedule))
        mtbf = self.config.effective_mtbf
        if mtbf is None:
            return None
        model = FailureModel.from_system(
            mtbf,
            self.config.cores,
            shape=self.sim_config.weibull_shape,
            seed=failure_seed(self.sim_config.seed, self.seed),
        )
        return FailureInjector(model.events())

    def _install(
        self,
        uid: ProcessId,
        app_state: dict,
        *,
        step: int,
        runtime_state: Optional[dict] = None,
    ) -> VirtualProcess:
        rt = Runtime(uid, self.world, self.transport, log_trim_bytes=self.sim_config.log_trim_bytes)
        if runtime_state is not None:
            rt.restore_state(runtime_state, self.world)
        vp = VirtualProcess(uid, rt, app_state, step=step)
        self._adopt(vp)
        return vp

    def _adopt(self, vp: VirtualProcess) -> None:
        self.sim.cancel(self._wakes.get(vp.uid))
        self.processes[vp.uid] = vp
        self.gens[vp.uid] = drive(vp, self.app, lambda: self.sim.now)
        self.status[vp.uid] = "run"
        self._wakes[vp.uid] = None

    def _drop(self, uid: ProcessId) -> None:
        self.sim.cancel(self._wakes.pop(uid, None))
        self.processes.pop(uid, None)
        self.gens.pop(uid, None)
        self.status.pop(uid, None)
        self._remaining.pop(uid, None)
        self.net.coordinators.remove_member(uid)

    def _spawn(self, rank: int) -> ProcessId:
        uid = self._next_uid
        self._next_uid += 1
        node = self.net.coordinators.node_of.get(self.world.cmp_group[rank], 0)
        self.net.add_process(uid, node)
        return uid

    def runtimes(self) -> Dict[ProcessId, Runtime]:
        return {uid: vp.runtime for uid, vp in self.processes.items()}

    def _live_counts(self) -> None:
        up = self.transport.is_up
        n_cmp = sum(1 for uid in self.world.cmp_group if up(uid))
        n_rep = sum(1 for uid in self.world.rep_group if up(uid))
        self.ledger.set_live(n_cmp, n_rep, self.sim.now)

    def _live_uids(self) -> List[ProcessId]:
        return [uid for uid in self.world.world if self.transport.is_up(uid)]

    # ----- scripted faults -----

    def kill_at(self, uid: ProcessId, at: float) -> None:
        """Kill `uid` at simulated time `at`."""
        self.sim.schedule("kill", at, uid=uid)

    def kill_after_event(self, index: int, uid: Optional[ProcessId] = None, *, selector: float = 0.0) -> None:
        """
        Kill a process right after the `index`-th dispatched event.

        With `uid` None the victim is picked from the live processes with
        `selector` like a sampled failure.
        """

        def hook(ev: SimEvent) -> None:
            if self.sim.dispatched != index or self.finished:
                return
            self.sim.after_dispatch = None
            victim = uid
            if victim is None:
                victim = FailureInjector([]).pick_victim(FailureEvent(self.sim.now, selector), self._live_uids())
            if victim is not None:
                self._kill(victim)

        self.sim.after_dispatch = hook

    # ----- main loop -----

    def _start(self) -> None:
        self._started = True
        self._live_counts()
        for uid in sorted(self.processes):
            self._schedule_wake(uid, 0.0)
        self._arm_failure()
        self._arm_timer()

    def run(self, until: Optional[float] = None) -> RunResult:
        """
        Drive the job until it finishes, aborts, or simulated time `until`.

        Raises:
            FtsimError: If no event is left but the job is not finished.
        """
        if not self._started:
            self._start()
        cap = STALL_FACTOR * self.total_steps * self.app.seconds_per_step
        horizon = cap if until is None else min(until, cap)
        try:
            self.sim.run(until=horizon)
        except JobAborted as exc:
            if self.mode != "plain":
                raise
            self.aborted = True
            log.warning("job aborted mode=%s t=%.3f: %s", self.mode, self.sim.now, exc)
        finally:
            self.sim.close()
        if not self.finished and not self.aborted:
            if until is None or until >= cap:
                if self.sim.now >= cap:
                    self.aborted = True
                    log.warning("job gave up t=%.3f rollbacks=%d", self.sim.now, self.rollbacks)
                else:
                    raise FtsimError(f"job stalled at t={self.sim.now:.6f} with no pending events")
        if self.aborted:
            released = self.net.interception.release()
            log.info("job aborted t=%.3f observations=%d", self.sim.now, len(released))
        return self.result()

    def result(self) -> RunResult:
        end = self.end_time if self.end_time is not None else self.sim.now
        steps = self.total_steps if self.finished else self._steps_done()
        flops_total = float(self.N * steps * self.app.flops_per_step)
        return RunResult(
            finished=self.finished,
            aborted=self.aborted,
            steps=steps,
            checksum=self.checksum(),
            trace_hash=self.sim.trace_hash,
            metrics=self.ledger.metrics(end, flops_total=flops_total),
            audit=audit_delivery(self),
            events=self.sim.dispatched,
            counts=dict(self.sim.counts),
            failures=self.failures,
            repairs=self.repairs,
            rollbacks=self.rollbacks,
            restarts=self.restarts,
            waves=self.waves,
        )

    def _steps_done(self) -> int:
        steps = [self.processes[uid].step for uid in self.world.cmp_group if uid in self.processes]
        return min(steps, default=0)

    def final_states(self) -> List[dict]:
        """Each logical rank's state, read from its computational copy."""
        return [self.processes[uid].app_state for uid in self.world.cmp_group if uid in self.processes]

    def checksum(self) -> str:
        return self.app.checksum(self.final_states())

    # ----- process scheduling -----

    def _schedule_wake(self, uid: ProcessId, at: float) -> None:
        self.sim.cancel(self._wakes.get(uid))
        self._wakes[uid] = self.sim.schedule("wake", max(at, self.sim.now), uid=uid)

    def _on_wake(self, ev: SimEvent) -> None:
        uid = ev.payload["uid"]
        if self._wakes.get(uid) == ev.seq:
            self._wakes[uid] = None
        if not self.frozen:
            self._run(uid)

    def _on_arrival(self, uid: ProcessId) -> None:
        if self.frozen or self.status.get(uid) != "blocked" or self._wakes.get(uid) is not None:
            return
        self._schedule_wake(uid, self.sim.now)

    def _run(self, uid: ProcessId) -> None:
        if uid not in self.processes or self.status[uid] in ("done", "parked"):
            return
        vp, gen = self.processes[uid], self.gens[uid]
        self.status[uid] = "run"
        while True:
            try:
                d = next(gen)
            except StopIteration:
                self.status[uid] = "done"
                self._check_done()
                return
            if d is BLOCKED:
                self.status[uid] = "blocked"
                return
            if isinstance(d, ComputeUntil):
                self.status[uid] = "compute"
                self._schedule_wake(uid, d.time)
                return
            if isinstance(d, SafePoint):
                if self._quiesce is not None and self._quiesce.park(uid, d.step):
                    self.status[uid] = "parked"
                    if self._quiesce.ready:
                        self._start_wave()
                    return
                continue
            if isinstance(d, LogTrim):
                seconds = d.freed / self.sim_config.trim_bandwidth
                self.ledger.advance(self.sim.now)
                self.ledger.log_trim(seconds, replica=vp.runtime.role.is_replica)
                vp.compute_until = self.sim.now + seconds
                self.trims += 1

    def _check_done(self) -> None:
        if self.finished:
            return
        if all(self.status.get(uid) == "done" for uid in self.world.world) and all(
            self.transport.is_up(uid) for uid in self.world.world
        ):
            self.finished = True
            self.end_time = self.sim.now
            self.sim.stop()
            released = self.net.interception.release()
            log.info(
                "job finished t=%.3f failures=%d repairs=%d rollbacks=%d waves=%d observations=%d",
                self.sim.now, self.failures, self.repairs, self.rollbacks, self.waves, len(released),
            )

    # ----- failures -----

    def _arm_failure(self) -> None:
        if self.injector is None:
            return
        ev = self.injector.next_event()
        self._next_failure = ev
        if ev is not None:
            self.sim.schedule("failure", max(ev.time, self.sim.now))

    def _on_failure(self, ev: SimEvent) -> None:
        event = self._next_failure
        if event is None or self.finished:
            return
        victim = self.injector.pick_victim(event, self._live_uids())
        self._arm_failure()
        if victim is not None:
            self._kill(victim, event)

    def _on_kill(self, ev: SimEvent) -> None:
        uid = ev.payload["uid"]
        self._kill(uid, FailureEvent(time=self.sim.now, selector=0.0, victim=uid))

    def _kill(self, uid: ProcessId, event: Optional[FailureEvent] = None) -> None:
        if uid not in self.processes or not self.transport.is_up(uid):
            return
        self.ledger.advance(self.sim.now)
        event = event or FailureEvent(time=self.sim.now, selector=0.0, victim=uid)
        self.failures += 1
        self.failure_events.append(event)
        self._event_of[uid] = event
        self.sim.cancel(self._wakes.get(uid))
        self._wakes[uid] = None
        self.status[uid] = "dead"
        obs = self.net.kill_process(uid)
        self._abort_wave("kill")
        self._live_counts()
        if obs is not None:
            event.detected_at = obs.detected_at
            self.sim.schedule("notify", obs.detected_at, uids=[uid])

    def _on_notify(self, ev: SimEvent) -> None:
        self._pending_failed.update(ev.payload["uids"])
        if self._repair_ev is None:
            self._repair_ev = self.sim.schedule("repair", self.sim.now)

    def _on_repair(self, ev: SimEvent) -> None:
        self._repair_ev = None
        failed = {uid for uid in self._pending_failed if self.world.contains(uid)}
        self._pending_failed.clear()
        if not failed or self.finished:
            return
        if self.mode == "ckpt":
            self._rollback(failed)
        else:
            self._repair(failed)

    def _account(self, classes: Dict[ProcessId, Classification], *, rollback: bool) -> None:
        regressed = False
        for uid, cls in classes.items():
            event = self._event_of.get(uid) or FailureEvent(time=self.sim.now, selector=0.0, victim=uid)
            classify_and_account(event, cls, self.ledger, rollback=rollback and not regressed)
            regressed = regressed or rollback
        if rollback and not regressed:
            self.ledger.regress()

    def _repair(self, failed: Set[ProcessId]) -> None:
        now = self.sim.now
        self.ledger.advance(now)
        outcome = repair_world(self.world, failed, runtimes=self.runtimes(), transport=self.transport)
        if not outcome.recoverable:
            self._rollback(failed, classes=outcome.classifications)
            return
        before, after = outcome.before, outcome.world
        for uid in sorted(failed):
            self._drop(uid)
        for uid, rank in sorted(moved_replicas(before, after).items()):
            twin = after.cmp_group[rank]
            clone = clone_process(self.processes[twin], uid, shared=(self.transport, self.sim, self.net))
            self._adopt(clone)
            if twin in self._remaining:
                self._remaining[uid] = self._remaining[twin]
            else:
                self._remaining.pop(uid, None)
        self.world = after
        for vp in self.processes.values():
            vp.runtime.set_world(after)
        self.transport.cancel_ops(after.epoch)
        try:
            recovery = recover_messages(after, self.runtimes())
        except LogGapError as exc:
            log.warning("message recovery hit a trimmed log, rolling back: %s", exc)
            self._rollback(set(), classes=outcome.classifications)
            return
        self._account(outcome.classifications, rollback=False)
        self.repairs += 1
        cost = GROUPS_PER_REPAIR * self.sim_config.comm_create_s + self.transport.latency(recovery.bytes)
        self._live_counts()
        self._freeze(cost, Phase.ROLLBACK, then="resume")

    def _rollback(self, failed: Set[ProcessId], *, classes: Optional[Dict[ProcessId, Classification]] = None) -> None:
        now = self.sim.now
        self.ledger.advance(now)
        self._abort_wave("rollback")
        self.sim.cancel(self._timer_ev)
        self._timer_ev = None
        self._timer_fired_at = None
        for uid in list(self._wakes):
            self.sim.cancel(self._wakes[uid])
            self._wakes[uid] = None
        self.transport.flush(deliver=False)
        dead = {uid for uid in self.world.world if not self.transport.is_up(uid)} | set(failed)
        if classes is None:
            classes = classify(self.world, dead)
        for uid in sorted(dead):
            self._drop(uid)
        new_world = respawn(self.world, dead, self._spawn)
        self.transport.cancel_ops(new_world.epoch)
        self.world = new_world
        records = rollback_restore(self.store, new_world, incarnation=self.incarnation)
        self.processes.clear()
        self.gens.clear()
        self.status.clear()
        self._remaining.clear()
        for uid in new_world.world:
            record = records[uid]
            self._install(uid, copy.deepcopy(record.app_state), step=record.header.step, runtime_state=record.runtime_state)
        self._account(classes, rollback=True)
        self.rollbacks += 1
        if self.mode == "repl":
            self.restarts += 1
        self._restore_s = new_world.nC * self.sim_config.state_bytes / self.bandwidth
        log.info(
            "rollback t=%.3f epoch=%d respawned=%d step=%d",
            now, new_world.epoch, len(dead), min(vp.step for vp in self.processes.values()),
        )
        self._live_counts()
        self._freeze(GROUPS_PER_REPAIR * self.sim_config.comm_create_s, Phase.ROLLBACK, then="restore")

    # ----- stop-the-world phases -----

    def _freeze(self, seconds: float, phase: Phase, *, then: str) -> None:
        now = self.sim.now
        self.ledger.set_phase(phase, now)
        if not self.frozen:
            for uid, vp in self.processes.items():
                if vp.compute_until > now:
                    self._remaining[uid] = vp.compute_until - now
            self.frozen = True
        for uid in self.processes:
            self.sim.cancel(self._wakes.get(uid))
            self._wakes[uid] = None
        self.sim.cancel(self._resume_ev)
        self._resume_ev = self.sim.schedule(then, now + seconds)

    def _on_restore(self, ev: SimEvent) -> None:
        self.ledger.set_phase(Phase.RESTORE, self.sim.now)
        self._resume_ev = self.sim.schedule("resume", self.sim.now + self._restore_s)

    def _on_resume(self, ev: SimEvent) -> None:
        now = self.sim.now
        self._resume_ev = None
        self.frozen = False
        self.ledger.set_phase(Phase.APP, now)
        for uid in sorted(self.processes):
            vp = self.processes[uid]
            rem = self._remaining.pop(uid, None)
            if rem:
                vp.compute_until = now + rem
            if self.status[uid] not in ("done", "parked"):
                self._schedule_wake(uid, now)
        self._remaining.clear()
        # a repair may leave only finished copies behind
        self._check_done()
        self._arm_timer()

    # ----- checkpoint waves -----

    def _arm_timer(self) -> None:
        if not self.policy.enabled or self._timer_ev is not None or self._quiesce is not None or self.finished:
            return
        # periodic from the last expiry, never earlier than now
        base = self.sim.now if self._timer_fired_at is None else self._timer_fired_at
        deadline = max(self.sim.now, base + self.policy.tau)
        self._timer_ev = self.sim.schedule("ckpt_timer", deadline)
        self.net.coordinators.restart_timer(deadline)

    def _on_ckpt_timer(self, ev: SimEvent) -> None:
        self._timer_ev = None
        if self.finished or self.frozen:
            return
        self._timer_fired_at = self.sim.now
        self.timer_fires.append(self.sim.now)
        self._wave_seq += 1
        arrival = self.net.coordinator_broadcast_checkpoint()
        self._timer_ev = self.sim.schedule("ckpt_request", arrival, seq=self._wave_seq)

    def _on_ckpt_request(self, ev: SimEvent) -> None:
        self._timer_ev = None
        if self.finished or self.frozen or self._quiesce is not None:
            return
        if any(not self.transport.is_up(uid) for uid in self.world.world):
            log.warning("checkpoint request seq=%d deferred: repair pending", ev.payload["seq"])
            return
        self._quiesce = quiesce(
            self.world, self.processes, seq=ev.payload["seq"], now=self.sim.now, total_steps=self.total_steps
        )

    def _start_wave(self) -> None:
        token = self._quiesce
        now = self.sim.now
        token.granted_at = now
        self.wave_starts.append(now)
        self.transport.flush(deliver=True)
        for vp in self.processes.values():
            vp.runtime.drain_inflight()
        self._wave_records = snapshot_wave(self.world, self.processes, incarnation=self.incarnation, seq=token.seq)
        self.ledger.set_phase(Phase.CREATE, now)
        C = self.policy.C
        nC = self.world.nC
        self._wave_events = [
            self.sim.schedule("record_landed", now + C * (i + 1) / nC, seq=token.seq, rank=i) for i in range(nC)
        ]
        self._wave_events.append(self.sim.schedule("marker_commit", now + C, seq=token.seq))
        log.debug("wave started seq=%d step=%d t=%.3f", token.seq, token.target_step, now)

    def _on_record_landed(self, ev: SimEvent) -> None:
        if self._quiesce is None or ev.payload["seq"] != self._quiesce.seq:
            return
        self.store.write_record(self._wave_records[ev.payload["rank"]])

    def _on_marker_commit(self, ev: SimEvent) -> None:
        token = self._quiesce
        if token is None or ev.payload["seq"] != token.seq:
            return
        self.store.commit(LatestMarker(incarnation=self.incarnation, seq=token.seq, nC=self.world.nC))
        for vp in self.processes.values():
            vp.runtime.mark_stable(vp.runtime.send_counters, vp.runtime.coll_seq)
        self.ledger.commit()
        self.waves += 1
        self._end_quiesce()
        self.ledger.set_phase(Phase.APP, self.sim.now)
        self._arm_timer()

    def _end_quiesce(self) -> None:
        token = self._quiesce
        self._quiesce = None
        self._wave_records = []
        self._wave_events = []
        for uid in sorted(token.parked):
            if self.status.get(uid) == "parked":
                self.status[uid] = "run"
                self._schedule_wake(uid, self.sim.now)

    def _abort_wave(self, reason: str) -> None:
        token = self._quiesce
        if token is None:
            return
        self._timer_fired_at = None
        for event_id in self._wave_events:
            self.sim.cancel(event_id)
        if token.granted_at is not None:
            self.ledger.set_phase(Phase.APP, self.sim.now)
        log.warning("wave aborted seq=%d reason=%s", token.seq, reason)
        self._end_quiesce()


# =============================================================================
# Exactly-once audit
# =============================================================================

def audit_delivery(job: Job) -> DeliveryAudit:
    """
    Compare, per live logical channel, the consumed send-ids with 1..counter
    of the sender responsible for that receiver.
    """
    world = job.world
    audit = DeliveryAudit()
    for uid in world.world:
        vp = job.processes.get(uid)
        if vp is None:
            continue
        rt = vp.runtime
        audit.suppressed += rt.stats["suppressed"]
        audit.duplicated += rt.stats["duplicated"]
        for src in range(world.nC):
            sender = job.processes.get(world.responsible_sender(src, uid))
            if sender is None:
                continue
            head = sender.runtime.log_head(rt.rank)
            consumed = rt.consumed.get(src)
            if head == 0 and consumed is None:
                continue
            audit.channels += 1
            if consumed is None:
                audit.lost += head
                continue
            audit.lost += sum(1 for x in range(consumed.floor + 1, head + 1) if x not in consumed)
            audit.duplicated += sum(1 for x in consumed.extras if x > head)
            if consumed.floor > head:
                audit.duplicated += consumed.floor - head
    return audit


__all__ = ["Job", "RunResult", "audit_delivery", "failure_seed", "GROUPS_PER_REPAIR"]
