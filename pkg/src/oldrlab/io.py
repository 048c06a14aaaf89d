"""Binary snapshots, config hashing and the seeded generator.

Snapshot layout (little-endian): magic b"OLDR", then u32 version, dim, n and
field count, then each field name as a u32 byte length plus UTF-8 bytes, then
each field as row-major float64 values.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path
from typing import Mapping

import numpy as np

MAGIC = b"OLDR"
SNAPSHOT_VERSION = 1


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based Philox stream keyed by the config seed."""
    return np.random.Generator(np.random.Philox(key=int(seed)))


def write_snapshot(path, dim: int, n: int, fields: Mapping[str, np.ndarray]):
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<4I", SNAPSHOT_VERSION, dim, n, len(fields)))
        for name in fields:
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
        for name, arr in fields.items():
            a = np.asarray(arr, dtype="<f8")
            if a.shape != (n,) * dim:
                raise ValueError(f"field {name!r} has shape {a.shape}, expected {(n,) * dim}")
            fh.write(np.ascontiguousarray(a).tobytes(order="C"))


def read_snapshot(path) -> tuple[int, int, dict[str, np.ndarray]]:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise ValueError("not an OLDR snapshot")
    version, dim, n, count = struct.unpack_from("<4I", data, 4)
    if version != SNAPSHOT_VERSION:
        raise ValueError(f"unsupported snapshot version {version}")
    off = 20
    names = []
    for _ in range(count):
        (ln,) = struct.unpack_from("<I", data, off)
        off += 4
        names.append(data[off : off + ln].decode("utf-8"))
        off += ln
    size = n**dim
    fields = {}
    for name in names:
        arr = np.frombuffer(data, dtype="<f8", count=size, offset=off).reshape((n,) * dim)
        fields[name] = arr.astype(float)
        off += 8 * size
    if off != len(data):
        raise ValueError("trailing bytes in snapshot")
    return dim, n, fields


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_jsonable)


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x)}")


def config_hash(cfg: Mapping) -> str:
    """SHA-256 of the canonical JSON form; equal configs hash equally regardless of key order."""
    return hashlib.sha256(canonical_json(_normalize(cfg)).encode()).hexdigest()


def _normalize(x):
    if isinstance(x, Mapping):
        return {str(k): _normalize(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_normalize(v) for v in x]
    if isinstance(x, bool) or x is None or isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return float(x)  # 1 and 1.0 mean the same parameter
    if isinstance(x, (float, np.floating)):
        return float(x)
    return x
