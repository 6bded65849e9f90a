# src/ftsim/core/errors.py
"""Exception hierarchy shared by the simulator modules."""

from __future__ import annotations


class FtsimError(RuntimeError):
    """Base class for every error raised by ftsim."""


# ----- Topology -----

class TopologyError(FtsimError):
    pass


class TopologyConstructionError(TopologyError):
    """Invalid N/M or duplicate uids when building a world."""


class UnrecoverableWorldError(TopologyError):
    """Some logical rank lost every copy; the job must roll back or restart."""

    def __init__(self, message: str, lost_ranks: tuple[int, ...] = ()) -> None:
        super().__init__(message)
        self.lost_ranks = lost_ranks


class RoutingError(TopologyError):
    pass


# ----- Simulation substrate -----

class SchedulingError(FtsimError):
    """An event was scheduled before the current simulated time."""


class JobAborted(FtsimError):
    """Fatal job abort (native transport saw a death, or nothing left to recover)."""


# ----- Runtime / recovery -----

class CollectiveMismatchError(FtsimError):
    """Processes disagree on the collective issued at one sequence number."""


class LogGapError(FtsimError):
    """Recovery needed a log entry that was already trimmed."""


# ----- Checkpointing -----

class CheckpointError(FtsimError):
    pass


class RestartError(CheckpointError):
    pass


class StoreIOError(CheckpointError):
    pass


class ConfigError(ValueError):
    pass


__all__ = [
    "FtsimError",
    "TopologyError",
    "TopologyConstructionError",
    "UnrecoverableWorldError",
    "RoutingError",
    "SchedulingError",
    "JobAborted",
    "CollectiveMismatchError",
    "LogGapError",
    "CheckpointError",
    "RestartError",
    "StoreIOError",
    "ConfigError",
]
