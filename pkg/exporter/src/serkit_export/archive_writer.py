"""Standalone writer for the serkit tensor-archive byte format.

Deliberately independent of the serkit package: this side writes the
format from its published description, serkit reads it, and the
round-trip test keeps the two honest against each other.

Layout: magic "SERTA1\\0\\0" | manifest length (u64 LE) | manifest JSON |
zero padding to a 64-byte boundary | float32 LE tensor payload with
64-byte-aligned offsets relative to the payload start.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"SERTA1\x00\x00"
_ALIGN = 64


def _align(n: int) -> int:
    return (n + _ALIGN - 1) // _ALIGN * _ALIGN


def write_archive(path, manifest: dict, tensors: dict[str, np.ndarray]) -> None:
    index = {}
    blobs = []
    offset = 0
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype=np.float32)
        raw = arr.astype("<f4").tobytes()
        index[name] = {"shape": list(arr.shape), "offset": offset}
        blobs.append((offset, raw))
        offset = _align(offset + len(raw))

    manifest = dict(manifest)
    manifest["tensor_index"] = index
    body = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    header = MAGIC + struct.pack("<Q", len(body)) + body
    payload_start = _align(len(header))
    total = payload_start + (_align(blobs[-1][0] + len(blobs[-1][1])) if blobs else 0)

    out = bytearray(total)
    out[: len(header)] = header
    for off, raw in blobs:
        out[payload_start + off : payload_start + off + len(raw)] = raw
    Path(path).write_bytes(bytes(out))
