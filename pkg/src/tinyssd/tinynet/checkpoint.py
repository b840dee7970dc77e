"""Binary checkpoint format (little-endian).

    magic      4 bytes  b"SSDT"
    version    u32
    step       u64      training step counter
    seed       u64      RNG seed of the run
    count      u32      number of records
    records:
        name_len u32, name (utf-8)
        rank     u32
        extents  u64 * rank
        data     float32 * prod(extents)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"SSDT"
VERSION = 1


@dataclass
class Checkpoint:
    params: dict[str, np.ndarray]
    step: int = 0
    seed: int = 0


def save(path, ckpt: Checkpoint) -> None:
    parts = [MAGIC, struct.pack("<IQQI", VERSION, ckpt.step, ckpt.seed, len(ckpt.params))]
    for name in sorted(ckpt.params):
        arr = np.asarray(ckpt.params[name])
        raw = name.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)) + raw)
        parts.append(struct.pack(f"<I{arr.ndim}Q", arr.ndim, *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load(path) -> Checkpoint:
    buf = Path(path).read_bytes()
    if buf[:4] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint (bad magic)")
    off = 4
    version, step, seed, count = struct.unpack_from("<IQQI", buf, off)
    off += struct.calcsize("<IQQI")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    params = {}
    try:
        for _ in range(count):
            (nlen,) = struct.unpack_from("<I", buf, off)
            off += 4
            name = buf[off:off + nlen].decode("utf-8")
            off += nlen
            (rank,) = struct.unpack_from("<I", buf, off)
            off += 4
            shape = struct.unpack_from(f"<{rank}Q", buf, off)
            off += 8 * rank
            n = int(np.prod(shape, dtype=np.int64))
            if off + 4 * n > len(buf):
                raise ValueError("truncated data")
            params[name] = np.frombuffer(buf, dtype="<f4", count=n, offset=off).reshape(shape).astype(np.float32)
            off += 4 * n
    except struct.error as exc:
        raise ValueError(f"{path}: truncated checkpoint") from exc
    if off != len(buf):
        raise ValueError(f"{path}: trailing bytes after {count} records")
    return Checkpoint(params, step, seed)
