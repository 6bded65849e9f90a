"""
Binary framing helpers: length-prefixed JSON header followed by raw bytes.

Frame layout (big-endian):
    [4 bytes header length][header JSON, utf-8][body]

Numpy arrays are packed as raw buffers described in the header, so encoding
is byte-stable for equal inputs (no timestamps, sorted keys).
"""
from __future__ import annotations

import hashlib
import json
import struct
from typing import Any, Dict, Mapping, Tuple

import numpy as np

HEADER_STRUCT = struct.Struct(">I")


def frame(header: Mapping[str, Any], body: bytes = b"") -> bytes:
    """Prefix `body` with a length-delimited JSON header."""
    raw = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return HEADER_STRUCT.pack(len(raw)) + raw + body


def unframe(blob: bytes) -> Tuple[Dict[str, Any], bytes]:
    """
    Split a frame into (header, body).

    Raises:
        ValueError: If the blob is shorter than its declared header.
    """
    if len(blob) < HEADER_STRUCT.size:
        raise ValueError(f"frame too short: {len(blob)} bytes")
    (size,) = HEADER_STRUCT.unpack_from(blob, 0)
    start = HEADER_STRUCT.size
    if len(blob) < start + size:
        raise ValueError(f"truncated frame header: need {size} bytes, have {len(blob) - start}")
    header = json.loads(blob[start:start + size].decode("utf-8"))
    return header, blob[start + size:]


def digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def pack_state(state: Mapping[str, Any]) -> bytes:
    """
    Serialize an application state mapping.

    Values may be numpy arrays (any numeric dtype) or JSON-compatible scalars
    and lists. Arrays are laid out in sorted key order.
    """
    arrays: Dict[str, Dict[str, Any]] = {}
    scalars: Dict[str, Any] = {}
    chunks: list[bytes] = []
    offset = 0
    for key in sorted(state):
        value = state[key]
        if isinstance(value, np.ndarray):
            buf = np.ascontiguousarray(value).tobytes()
            arrays[key] = {
                "dtype": value.dtype.str,
                "shape": list(value.shape),
                "offset": offset,
                "nbytes": len(buf),
            }
            chunks.append(buf)
            offset += len(buf)
        elif isinstance(value, np.generic):
            scalars[key] = value.item()
        else:
            scalars[key] = value
    return frame({"arrays": arrays, "scalars": scalars}, b"".join(chunks))


def unpack_state(blob: bytes) -> Dict[str, Any]:
    """Inverse of pack_state; arrays come back as writable copies."""
    header, body = unframe(blob)
    state: Dict[str, Any] = dict(header.get("scalars", {}))
    for key, meta in header.get("arrays", {}).items():
        start = int(meta["offset"])
        raw = body[start:start + int(meta["nbytes"])]
        arr = np.frombuffer(raw, dtype=np.dtype(meta["dtype"])).reshape(meta["shape"])
        state[key] = arr.copy()
    return state


def payload_nbytes(payload: Any) -> int:
    """Approximate wire size of a message payload."""
    if payload is None:
        return 0
    if isinstance(payload, np.ndarray):
        return int(payload.nbytes)
    if isinstance(payload, (bytes, bytearray)):
        return len(payload)
    if isinstance(payload, (list, tuple)):
        return sum(payload_nbytes(p) for p in payload)
    if isinstance(payload, dict):
        return sum(payload_nbytes(v) for v in payload.values())
    return 8
