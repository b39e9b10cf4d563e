"""EMB1 writer/reader used by the bridge.

The bridge talks to the engine through files only, so this is an
independent implementation of the same byte layout: magic "EMB1", u32 LE
dim, u64 LE record count, then per record a u32 LE id length, UTF-8 id
bytes and dim little-endian float32 values.
"""

from __future__ import annotations

import struct
from typing import IO, Iterable

import numpy as np

MAGIC = b"EMB1"


def write_records(
    sink: IO[bytes], dim: int, records: Iterable[tuple[str, np.ndarray]]
) -> int:
    """Write records (sorted by id) and return the count written."""
    items = sorted(records, key=lambda r: r[0])
    sink.write(MAGIC)
    sink.write(struct.pack("<I", dim))
    sink.write(struct.pack("<Q", len(items)))
    for id_, vec in items:
        arr = np.asarray(vec, dtype="<f4")
        if arr.shape != (dim,):
            raise ValueError(f"record {id_!r} has shape {arr.shape}, expected ({dim},)")
        raw = id_.encode("utf-8")
        sink.write(struct.pack("<I", len(raw)))
        sink.write(raw)
        sink.write(arr.tobytes())
    return len(items)


def read_records(source: IO[bytes] | bytes) -> tuple[int, list[tuple[str, np.ndarray]]]:
    """Read back (dim, records); strict about truncation and trailing bytes."""
    data = source if isinstance(source, bytes) else source.read()
    if data[:4] != MAGIC:
        raise ValueError(f"bad magic {data[:4]!r}")
    dim = struct.unpack("<I", data[4:8])[0]
    count = struct.unpack("<Q", data[8:16])[0]
    pos = 16
    out = []
    for _ in range(count):
        (id_len,) = struct.unpack("<I", data[pos : pos + 4])
        pos += 4
        id_ = data[pos : pos + id_len].decode("utf-8")
        pos += id_len
        vec = np.frombuffer(data[pos : pos + dim * 4], dtype="<f4")
        if vec.shape != (dim,):
            raise ValueError(f"truncated record {id_!r}")
        pos += dim * 4
        out.append((id_, vec))
    if pos != len(data):
        raise ValueError("trailing bytes")
    return dim, out
