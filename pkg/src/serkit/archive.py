"""Portable named-tensor container.

Layout (all integers little-endian):

    bytes 0..8    magic  b"SERTA1\\0\\0"
    bytes 8..16   manifest length L as u64
    bytes 16..16+L  manifest, UTF-8 JSON; its "tensor_index" maps
                  name -> {"shape": [...], "offset": N}
    zero padding up to the next 64-byte file boundary
    tensor payload; each offset is relative to the payload start,
                  64-byte aligned, data row-major float32

The same container carries both encoder checkpoints and classifier-head
checkpoints; the manifest schema distinguishes them.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import ArchiveError, VersionError

MAGIC = b"SERTA1\x00\x00"
_ALIGN = 64


def _align(n: int) -> int:
    return (n + _ALIGN - 1) // _ALIGN * _ALIGN


def write_archive(path, manifest: dict, tensors: dict[str, np.ndarray]) -> None:
    """Serialize manifest + tensors; offsets are filled in deterministically.

    Any "tensor_index" already present in manifest is replaced.  Tensor
    names are laid out in sorted order so identical inputs yield identical
    bytes.
    """
    index = {}
    offset = 0
    blobs = []
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype=np.float32)
        index[name] = {"shape": list(arr.shape), "offset": offset}
        raw = arr.astype("<f4").tobytes()
        blobs.append((offset, raw))
        offset = _align(offset + len(raw))

    manifest = dict(manifest)
    manifest["tensor_index"] = index
    body = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    header = MAGIC + struct.pack("<Q", len(body)) + body
    payload_start = _align(len(header))

    out = bytearray(payload_start + (_align(blobs[-1][0] + len(blobs[-1][1])) if blobs else 0))
    out[: len(header)] = header
    for off, raw in blobs:
        out[payload_start + off : payload_start + off + len(raw)] = raw
    Path(path).write_bytes(bytes(out))


def read_archive(path) -> tuple[dict, dict[str, np.ndarray]]:
    """Load manifest dict and all tensors (as writable float32 arrays)."""
    data = Path(path).read_bytes()
    if len(data) < 16:
        raise ArchiveError(f"{path}: truncated header ({len(data)} bytes)")
    if data[:8] != MAGIC:
        if data[:5] == MAGIC[:5]:
            raise VersionError(f"{path}: unsupported archive version {data[:8]!r}")
        raise ArchiveError(f"{path}: bad magic {data[:8]!r}")
    (manifest_len,) = struct.unpack_from("<Q", data, 8)
    if 16 + manifest_len > len(data):
        raise ArchiveError(f"{path}: manifest ({manifest_len} bytes) extends past end of file")
    try:
        manifest = json.loads(data[16 : 16 + manifest_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ArchiveError(f"{path}: manifest is not valid JSON: {exc}") from exc
    if not isinstance(manifest, dict) or not isinstance(manifest.get("tensor_index"), dict):
        raise ArchiveError(f"{path}: manifest lacks a tensor_index map")

    payload_start = _align(16 + manifest_len)
    tensors = {}
    for name, spec in manifest["tensor_index"].items():
        try:
            shape = tuple(int(s) for s in spec["shape"])
            offset = int(spec["offset"])
        except (TypeError, KeyError, ValueError) as exc:
            raise ArchiveError(f"{path}: malformed index entry for {name!r}") from exc
        if offset % _ALIGN != 0:
            raise ArchiveError(f"{path}: tensor {name!r} offset {offset} not {_ALIGN}-byte aligned")
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        start = payload_start + offset
        end = start + count * 4
        if end > len(data):
            raise ArchiveError(f"{path}: tensor {name!r} extends past end of file")
        tensors[name] = np.frombuffer(data, dtype="<f4", count=count, offset=start).reshape(shape).copy()
    return manifest, tensors
