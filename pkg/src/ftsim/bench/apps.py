# src/ftsim/bench/apps.py
"""
Benchmark mini-apps.

Each app is a deterministic SPMD program split into phases (see
ftsim.core.runtime.drive). They exercise the protocol, not the science:

- stencil_halo: 1-D Jacobi sweep with halo exchange and a residual allreduce.
- cg_like: one conjugate-gradient iteration per step on tridiag(-1, 4, -1),
  with a halo spmv and two dot-product allreduces.
- particle_like: particles drifting on a periodic line, migrated with
  alltoall, plus a kinetic-energy allreduce and a load diagnostic: counts
  gathered on rank 0, per-rank excess scattered back, the peak count
  broadcast, then allgathered and fenced with a barrier.

Received payloads are read-only; phases build new arrays instead.
"""

from __future__ import annotations

import hashlib
from abc import ABC, abstractmethod
from typing import Any, Callable, Dict, List, Mapping, Sequence, Type

import numpy as np

from ..core.runtime import StepContext
from ..utils.codec import pack_state

Phase = Callable[[StepContext], None]

TAG_TO_LEFT = 0
TAG_TO_RIGHT = 1


class MiniApp(ABC):
    """
    Contract every bench app implements.

    Parameters
    ----------
    total_steps : int
        Application steps to run.
    seconds_per_step : float
        Simulated compute time charged per step and rank.
    cells_per_rank : int
        Local problem size.
    """

    name: str = "app"

    def __init__(self, *, total_steps: int, seconds_per_step: float = 60.0, cells_per_rank: int = 16) -> None:
        self.total_steps = total_steps
        self.seconds_per_step = seconds_per_step
        self.cells = cells_per_rank

    @property
    @abstractmethod
    def flops_per_step(self) -> float:
        """Analytical floating-point work of one step on one rank."""

    @abstractmethod
    def init_state(self, rank: int, size: int) -> Dict[str, Any]: ...

    @abstractmethod
    def phases(self) -> Sequence[Phase]: ...

    def checksum(self, states: Sequence[Mapping[str, Any]]) -> str:
        """sha256 over every rank's packed state, in logical-rank order."""
        h = hashlib.sha256()
        for state in states:
            h.update(pack_state(state))
        return h.hexdigest()


def _post_halo(ctx: StepContext, left_value: float, right_value: float) -> None:
    """Send edge values to both neighbours and receive theirs (zero at the walls)."""
    if ctx.rank > 0:
        ctx.isend(ctx.rank - 1, left_value, TAG_TO_LEFT)
        ctx.irecv(ctx.rank - 1, TAG_TO_RIGHT, into="left")
    if ctx.rank < ctx.size - 1:
        ctx.isend(ctx.rank + 1, right_value, TAG_TO_RIGHT)
        ctx.irecv(ctx.rank + 1, TAG_TO_LEFT, into="right")


# ----- stencil_halo -----

def jacobi_update(u: np.ndarray, left: float, right: float) -> np.ndarray:
    padded = np.concatenate(([left], u, [right]))
    return 0.5 * padded[1:-1] + 0.25 * (padded[:-2] + padded[2:])


def _stencil_init(rank: int, cells: int) -> np.ndarray:
    idx = np.arange(rank * cells, (rank + 1) * cells, dtype=np.float64)
    return 1.0 + np.sin(0.1 * idx)


class StencilHalo(MiniApp):
    name = "stencil_halo"

    @property
    def flops_per_step(self) -> float:
        return 6.0 * self.cells

    def init_state(self, rank: int, size: int) -> Dict[str, Any]:
        return {"u": _stencil_init(rank, self.cells), "residual": 0.0}

    def phases(self) -> Sequence[Phase]:
        return [self._exchange, self._update, self._store]

    def _exchange(self, ctx: StepContext) -> None:
        u = ctx.state["u"]
        _post_halo(ctx, float(u[0]), float(u[-1]))
        ctx.compute(self.seconds_per_step)

    def _update(self, ctx: StepContext) -> None:
        u = ctx.state["u"]
        new = jacobi_update(u, ctx.scratch.get("left", 0.0), ctx.scratch.get("right", 0.0))
        ctx.state["u"] = new
        ctx.allreduce(float(np.sum((new - u) ** 2)), "sum", into="residual")

    def _store(self, ctx: StepContext) -> None:
        ctx.state["residual"] = float(ctx.scratch["residual"])


def stencil_reference(size: int, cells: int, steps: int) -> List[Dict[str, Any]]:
    """
    Sequential evaluation of stencil_halo on the whole domain.

    Returns the per-rank final states a distributed run must reproduce.
    """
    u = np.concatenate([_stencil_init(r, cells) for r in range(size)])
    residual = 0.0
    for _ in range(steps):
        new = jacobi_update(u, 0.0, 0.0)
        partials = [float(np.sum((new[r * cells:(r + 1) * cells] - u[r * cells:(r + 1) * cells]) ** 2)) for r in range(size)]
        residual = partials[0]
        for p in partials[1:]:
            residual = residual + p
        u = new
    return [{"u": u[r * cells:(r + 1) * cells].copy(), "residual": residual} for r in range(size)]


# ----- cg_like -----

class CGLike(MiniApp):
    """Solves tridiag(-1, 4, -1) x = 1, one CG iteration per step."""

    name = "cg_like"

    @property
    def flops_per_step(self) -> float:
        return 19.0 * self.cells

    def init_state(self, rank: int, size: int) -> Dict[str, Any]:
        b = np.ones(self.cells, dtype=np.float64)
        return {
            "x": np.zeros(self.cells, dtype=np.float64),
            "r": b.copy(),
            "p": b.copy(),
            "rr": float(size * self.cells),
        }

    def phases(self) -> Sequence[Phase]:
        return [self._exchange, self._spmv, self._axpy, self._direction]

    def _exchange(self, ctx: StepContext) -> None:
        p = ctx.state["p"]
        _post_halo(ctx, float(p[0]), float(p[-1]))
        ctx.compute(self.seconds_per_step)

    def _spmv(self, ctx: StepContext) -> None:
        p = ctx.state["p"]
        padded = np.concatenate(([ctx.scratch.get("left", 0.0)], p, [ctx.scratch.get("right", 0.0)]))
        Ap = 4.0 * p - padded[:-2] - padded[2:]
        ctx.scratch["Ap"] = Ap
        ctx.allreduce(float(np.dot(p, Ap)), "sum", into="pAp")

    def _axpy(self, ctx: StepContext) -> None:
        s = ctx.state
        pAp = ctx.scratch["pAp"]
        alpha = s["rr"] / pAp if pAp != 0.0 else 0.0
        s["x"] = s["x"] + alpha * s["p"]
        s["r"] = s["r"] - alpha * ctx.scratch["Ap"]
        ctx.allreduce(float(np.dot(s["r"], s["r"])), "sum", into="rr_new")

    def _direction(self, ctx: StepContext) -> None:
        s = ctx.state
        rr_new = float(ctx.scratch["rr_new"])
        beta = rr_new / s["rr"] if s["rr"] != 0.0 else 0.0
        s["p"] = s["r"] + beta * s["p"]
        s["rr"] = rr_new


# ----- particle_like -----

class ParticleLike(MiniApp):
    """`cells_per_rank` particles per rank on the periodic line [0, size)."""

    name = "particle_like"
    dt = 1.0

    @property
    def flops_per_step(self) -> float:
        return 8.0 * self.cells

    def init_state(self, rank: int, size: int) -> Dict[str, Any]:
        k = self.cells
        ids = np.arange(rank * k, (rank + 1) * k, dtype=np.int64)
        return {
            "ids": ids,
            "pos": rank + (np.arange(k, dtype=np.float64) + 0.5) / k,
            "vel": 0.4 * np.sin(0.7 * ids.astype(np.float64)),
            "energy": 0.0,
            "excess": 0,
            "peak": 0,
            "peaks_seen": 0,
        }

    def phases(self) -> Sequence[Phase]:
        return [self._migrate, self._settle, self._store, self._balance, self._record, self._close]

    def _migrate(self, ctx: StepContext) -> None:
        s = ctx.state
        pos = np.mod(s["pos"] + self.dt * s["vel"], float(ctx.size))
        owner = np.floor(pos).astype(np.int64) % ctx.size
        outgoing = []
        for dest in range(ctx.size):
            mask = owner == dest
            outgoing.append({"ids": s["ids"][mask], "pos": pos[mask], "vel": s["vel"][mask]})
        ctx.alltoall(outgoing, into="arrivals")
        ctx.compute(self.seconds_per_step)

    def _settle(self, ctx: StepContext) -> None:
        arrivals = ctx.scratch["arrivals"]
        ids = np.concatenate([a["ids"] for a in arrivals])
        order = np.argsort(ids, kind="stable")
        s = ctx.state
        s["ids"] = ids[order]
        s["pos"] = np.concatenate([a["pos"] for a in arrivals])[order]
        s["vel"] = np.concatenate([a["vel"] for a in arrivals])[order]
        ctx.allreduce(float(np.sum(0.5 * s["vel"] ** 2)), "sum", into="energy")

    def _store(self, ctx: StepContext) -> None:
        ctx.state["energy"] = float(ctx.scratch["energy"])
        ctx.gather(int(ctx.state["ids"].size), root=0, into="counts")

    def _balance(self, ctx: StepContext) -> None:
        counts = ctx.scratch["counts"]
        if ctx.rank == 0:
            total = sum(counts)
            # excess in units of 1/size particle, kept integral
            ctx.scatter([c * ctx.size - total for c in counts], root=0, into="excess")
            ctx.bcast(max(counts), root=0, into="peak")
        else:
            ctx.scatter(None, root=0, into="excess")
            ctx.bcast(None, root=0, into="peak")

    def _record(self, ctx: StepContext) -> None:
        ctx.state["excess"] = int(ctx.scratch["excess"])
        ctx.state["peak"] = int(ctx.scratch["peak"])
        ctx.allgather(ctx.state["peak"], into="peaks")
        ctx.barrier()

    def _close(self, ctx: StepContext) -> None:
        ctx.state["peaks_seen"] = int(sum(ctx.scratch["peaks"]))


APPS: Dict[str, Type[MiniApp]] = {
    StencilHalo.name: StencilHalo,
    CGLike.name: CGLike,
    ParticleLike.name: ParticleLike,
}


def build_app(name: str, **kwargs: Any) -> MiniApp:
    try:
        cls = APPS[name]
    except KeyError as exc:
        raise KeyError(f"unknown app {name!r}; known: {sorted(APPS)}") from exc
    return cls(**kwargs)


__all__ = [
    "MiniApp",
    "StencilHalo",
    "CGLike",
    "ParticleLike",
    "APPS",
    "build_app",
    "jacobi_update",
    "stencil_reference",
]
