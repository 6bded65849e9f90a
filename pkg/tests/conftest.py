# tests/conftest.py
from __future__ import annotations

from typing import Any, Callable, Optional, Sequence, Tuple

import pytest

from ftsim.bench.campaign import build_app_for
from ftsim.bench.job import Job, RunResult
from ftsim.core.checkpoint import CheckpointStore
from ftsim.core.failure import FailureEvent
from ftsim.core.schemas import CampaignConfig, SimConfig
from ftsim.core.simnet import NativeTransport, Simulator
from ftsim.core.topology import build_world

# small state so checkpoint and restore phases stay short
TINY_SIM = {"state_bytes": 4096, "ckpt_bandwidth": 4096.0 * 64, "coord_hop_s": 1e-4}


def small_config(**overrides: Any) -> CampaignConfig:
    """A 4-rank, 6-step job with cheap steps; keyword arguments override fields."""
    sim = {**TINY_SIM, **overrides.pop("sim", {})}
    base = dict(
        app="stencil_halo",
        cores=4,
        mode="ckpt",
        steps=6,
        seconds_per_step=10.0,
        cells_per_rank=4,
        sim=SimConfig(**sim),
    )
    base.update(overrides)
    return CampaignConfig(**base)


def run_job(
    config: CampaignConfig,
    *,
    seed: int = 0,
    schedule: Optional[Sequence[FailureEvent]] = None,
    store: Optional[CheckpointStore] = None,
    setup: Optional[Callable[[Job], None]] = None,
) -> Tuple[Job, RunResult]:
    job = Job(build_app_for(config), config, seed=seed, schedule=schedule, store=store)
    if setup is not None:
        setup(job)
    return job, job.run()


def failure_free_checksum(config: CampaignConfig) -> str:
    plain = config.model_copy(update={"mode": "plain", "replicas": 0, "replication": 0.0, "cores": config.n_ranks,
                                      "mtbf": None, "tau": None, "schedule": None})
    _, result = run_job(plain)
    assert result.finished
    return result.checksum


@pytest.fixture
def config_factory() -> Callable[..., CampaignConfig]:
    return small_config


@pytest.fixture
def sim() -> Simulator:
    return Simulator()


@pytest.fixture
def transport(sim: Simulator) -> NativeTransport:
    return NativeTransport(sim, latency_base_s=1e-6, latency_per_byte_s=1e-9)


@pytest.fixture
def world_4_2():
    """N=4 computational processes, replicas for ranks 0 and 1."""
    return build_world(4, 2, list(range(6)))
