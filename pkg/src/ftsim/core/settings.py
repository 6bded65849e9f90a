# src/ftsim/core/settings.py
from __future__ import annotations

"""
Simulation defaults.

Every constant can be overridden through the environment (a project-root
.env file is loaded by the CLI). Per-run values live in SimConfig; these are
only the defaults it starts from.

Environment variables (selected):
  # Transport cost model
  - FTSIM_LATENCY_BASE_S      (default: "1e-6")
  - FTSIM_LATENCY_PER_BYTE_S  (default: "1e-9")

  # Node layout / coordinators
  - FTSIM_CORES_PER_NODE      (default: "48")
  - FTSIM_COORD_GROUPS        (default: "0")    # 0 = round(sqrt(#nodes))
  - FTSIM_COORD_HOP_S         (default: "0.001")

  # Checkpoint store
  - FTSIM_STATE_BYTES         (default: 256 MiB nominal footprint per rank)
  - FTSIM_CKPT_BANDWIDTH      (default: calibrated so 8192 ranks write in 215 s)

  # Failures / recovery
  - FTSIM_WEIBULL_SHAPE       (default: "0.7")
  - FTSIM_COMM_CREATE_S       (default: "0.02")
  - FTSIM_LOG_TRIM_BYTES      (default: 64 MiB)
  - FTSIM_TRIM_BANDWIDTH      (default: 10 GiB/s)

  # Misc
  - FTSIM_SEED                (default: "0")
  - FTSIM_LOG_LEVEL           (default: "WARNING")
  - FTSIM_MODES               (JSON list or comma-separated)
"""

import json
import os
from typing import Iterable, List, Tuple


# -------------------------
# Small helpers
# -------------------------

def _json_env(name: str, default_list: Iterable[str]) -> Tuple[str, ...]:
    """
    Read a JSON list from an environment variable; fall back to defaults on
    a missing or invalid value.
    """
    try:
        raw = os.getenv(name, "")
        if not raw:
            return tuple(default_list)
        parsed = json.loads(raw)
        if isinstance(parsed, list):
            return tuple(str(x) for x in parsed)
        return tuple(default_list)
    except Exception:
        return tuple(default_list)


def _list_env(name: str, default: Iterable[str] = ()) -> List[str]:
    """
    Read a list-like environment variable from JSON ('[...]') or CSV.
    """
    value = os.getenv(name, "")
    if value.strip().startswith("["):
        return list(_json_env(name, default))
    items = [x.strip() for x in value.split(",") if x.strip()]
    return items or list(default)


# -------------------------
# Transport cost model
# -------------------------

LATENCY_BASE_S: float = float(os.getenv("FTSIM_LATENCY_BASE_S", "1e-6"))
LATENCY_PER_BYTE_S: float = float(os.getenv("FTSIM_LATENCY_PER_BYTE_S", "1e-9"))


# -------------------------
# Node layout / coordinators
# -------------------------

CORES_PER_NODE: int = int(os.getenv("FTSIM_CORES_PER_NODE", "48"))
COORD_GROUPS: int = int(os.getenv("FTSIM_COORD_GROUPS", "0"))  # 0 = round(sqrt(nodes))
COORD_HOP_S: float = float(os.getenv("FTSIM_COORD_HOP_S", "0.001"))


# -------------------------
# Checkpoint store
# -------------------------

# Nominal per-rank memory footprint written by a checkpoint wave.
STATE_BYTES: int = int(os.getenv("FTSIM_STATE_BYTES", str(256 * 2**20)))

# Aggregate store bandwidth: 8192 ranks x STATE_BYTES land in 215 s.
CALIBRATION_RANKS = 8192
CALIBRATION_CKPT_S = 215.0
CKPT_BANDWIDTH: float = float(
    os.getenv("FTSIM_CKPT_BANDWIDTH", str(CALIBRATION_RANKS * STATE_BYTES / CALIBRATION_CKPT_S))
)


# -------------------------
# Failures / recovery
# -------------------------

WEIBULL_SHAPE: float = float(os.getenv("FTSIM_WEIBULL_SHAPE", "0.7"))
COMM_CREATE_S: float = float(os.getenv("FTSIM_COMM_CREATE_S", "0.02"))
LOG_TRIM_BYTES: int = int(os.getenv("FTSIM_LOG_TRIM_BYTES", str(64 * 2**20)))
# Local memory bandwidth used to charge log garbage collection.
TRIM_BANDWIDTH: float = float(os.getenv("FTSIM_TRIM_BANDWIDTH", str(10 * 2**30)))


# -------------------------
# Misc
# -------------------------

SEED: int = int(os.getenv("FTSIM_SEED", "0"))
LOG_LEVEL: str = os.getenv("FTSIM_LOG_LEVEL", "WARNING")
MODES: Tuple[str, ...] = tuple(_list_env("FTSIM_MODES", ["plain", "ckpt", "repl", "combined"]))


__all__ = [
    # Transport
    "LATENCY_BASE_S",
    "LATENCY_PER_BYTE_S",
    # Layout
    "CORES_PER_NODE",
    "COORD_GROUPS",
    "COORD_HOP_S",
    # Store
    "STATE_BYTES",
    "CALIBRATION_RANKS",
    "CALIBRATION_CKPT_S",
    "CKPT_BANDWIDTH",
    # Failures
    "WEIBULL_SHAPE",
    "COMM_CREATE_S",
    "LOG_TRIM_BYTES",
    "TRIM_BANDWIDTH",
    # Misc
    "SEED",
    "LOG_LEVEL",
    "MODES",
]
