"""Binary checkpoint container.

Layout (all integers little-endian):

    magic   b"PNSP"
    u32     format version (currently 1)
    u32     record count
    records repeated:
        u32     name length in bytes
        bytes   UTF-8 name
        u32     rank
        u64[r]  dims
        f64[*]  payload, row-major
    u64     trailer length in bytes
    bytes   UTF-8 JSON config trailer
    u32     CRC32 of every preceding byte

Round-trips are bit-exact: payloads are raw float64 and the trailer is
serialized with sorted keys.
"""

from __future__ import annotations

import json
import os
import struct
import zlib

import numpy as np

from ..errors import DataError

MAGIC = b"PNSP"
FORMAT_VERSION = 1


def _pack_record(name: str, array: np.ndarray) -> bytes:
    payload = np.ascontiguousarray(array, dtype=np.float64)
    name_bytes = name.encode("utf-8")
    head = struct.pack("<I", len(name_bytes)) + name_bytes
    head += struct.pack("<I", payload.ndim)
    head += struct.pack(f"<{payload.ndim}Q", *payload.shape) if payload.ndim else b""
    return head + payload.tobytes(order="C")


def write_checkpoint(path, arrays: dict[str, np.ndarray], config: dict):
    """Write arrays plus a JSON config trailer atomically."""
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<I", FORMAT_VERSION)
    blob += struct.pack("<I", len(arrays))
    for name in arrays:
        blob += _pack_record(name, arrays[name])
    trailer = json.dumps(config, sort_keys=True, separators=(",", ":")).encode("utf-8")
    blob += struct.pack("<Q", len(trailer))
    blob += trailer
    blob += struct.pack("<I", zlib.crc32(bytes(blob)) & 0xFFFFFFFF)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(bytes(blob))
    os.replace(tmp, path)


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise DataError("checkpoint truncated")
        out = self.blob[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]


def read_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    """Read a checkpoint, validating magic, version, and CRC32."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 16:
        raise DataError("checkpoint too small")
    stored_crc = struct.unpack("<I", blob[-4:])[0]
    if zlib.crc32(blob[:-4]) & 0xFFFFFFFF != stored_crc:
        raise DataError("checkpoint CRC mismatch")
    rd = _Reader(blob[:-4])
    if rd.take(4) != MAGIC:
        raise DataError("not a checkpoint file (bad magic)")
    version = rd.u32()
    if version != FORMAT_VERSION:
        raise DataError(f"unsupported checkpoint version {version}")
    count = rd.u32()
    arrays: dict[str, np.ndarray] = {}
    for _ in range(count):
        name = rd.take(rd.u32()).decode("utf-8")
        rank = rd.u32()
        dims = tuple(rd.u64() for _ in range(rank))
        n_values = int(np.prod(dims)) if dims else 1
        payload = rd.take(8 * n_values)
        arrays[name] = np.frombuffer(payload, dtype="<f8").reshape(dims).copy()
    trailer = rd.take(rd.u64()).decode("utf-8")
    if rd.pos != len(rd.blob):
        raise DataError("checkpoint has trailing bytes")
    return arrays, json.loads(trailer)
