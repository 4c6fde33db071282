"""Container format: byte layout, round trips, corruption handling."""

import json
import struct

import numpy as np
import pytest

from serkit.archive import MAGIC, read_archive, write_archive
from serkit.errors import ArchiveError, VersionError

RNG = np.random.default_rng(13)


def sample_tensors():
    return {
        "b.vec": RNG.normal(size=7).astype(np.float32),
        "a.mat": RNG.normal(size=(3, 5)).astype(np.float32),
        "c.scalar_ish": RNG.normal(size=(1,)).astype(np.float32),
    }


def test_round_trip_exact(tmp_path):
    path = tmp_path / "t.serta"
    tensors = sample_tensors()
    write_archive(path, {"kind": "test", "note": 1}, tensors)
    manifest, loaded = read_archive(path)
    assert manifest["kind"] == "test"
    assert set(loaded) == set(tensors)
    for name, arr in tensors.items():
        np.testing.assert_array_equal(loaded[name], arr)


def test_layout_is_spec_exact(tmp_path):
    path = tmp_path / "t.serta"
    write_archive(path, {}, {"x": np.arange(4, dtype=np.float32)})
    raw = path.read_bytes()
    assert raw[:8] == MAGIC == b"SERTA1\x00\x00"
    (mlen,) = struct.unpack_from("<Q", raw, 8)
    manifest = json.loads(raw[16 : 16 + mlen])
    offset = manifest["tensor_index"]["x"]["offset"]
    assert offset % 64 == 0
    payload_start = (16 + mlen + 63) // 64 * 64
    vals = np.frombuffer(raw, dtype="<f4", count=4, offset=payload_start + offset)
    np.testing.assert_array_equal(vals, [0, 1, 2, 3])


def test_deterministic_bytes(tmp_path):
    tensors = sample_tensors()
    a, b = tmp_path / "a", tmp_path / "b"
    write_archive(a, {"k": "v"}, tensors)
    write_archive(b, {"k": "v"}, dict(reversed(list(tensors.items()))))
    assert a.read_bytes() == b.read_bytes()


def test_bad_magic(tmp_path):
    path = tmp_path / "bad"
    path.write_bytes(b"NOTRIGHT" + b"\x00" * 32)
    with pytest.raises(ArchiveError):
        read_archive(path)


def test_future_version(tmp_path):
    path = tmp_path / "future"
    path.write_bytes(b"SERTA9\x00\x00" + b"\x00" * 32)
    with pytest.raises(VersionError):
        read_archive(path)


def test_truncated_file_never_crashes(tmp_path):
    path = tmp_path / "t.serta"
    write_archive(path, {}, sample_tensors())
    raw = path.read_bytes()
    (mlen,) = struct.unpack_from("<Q", raw, 8)
    index = json.loads(raw[16 : 16 + mlen])["tensor_index"]
    payload_start = (16 + mlen + 63) // 64 * 64
    last_end = payload_start + max(
        spec["offset"] + 4 * int(np.prod(spec["shape"])) for spec in index.values()
    )
    for cut in (0, 4, 15, 16 + mlen // 2, payload_start + 2, last_end - 2):
        short = tmp_path / f"cut{cut}"
        short.write_bytes(raw[:cut])
        with pytest.raises((ArchiveError, VersionError)):
            read_archive(short)


def test_garbage_manifest(tmp_path):
    path = tmp_path / "g"
    body = b"{not json"
    path.write_bytes(MAGIC + struct.pack("<Q", len(body)) + body)
    with pytest.raises(ArchiveError):
        read_archive(path)


def test_unaligned_offset_rejected(tmp_path):
    path = tmp_path / "u"
    manifest = {"tensor_index": {"x": {"shape": [1], "offset": 13}}}
    body = json.dumps(manifest).encode()
    blob = MAGIC + struct.pack("<Q", len(body)) + body
    blob += b"\x00" * ((len(blob) + 63) // 64 * 64 - len(blob)) + b"\x00" * 64
    path.write_bytes(blob)
    with pytest.raises(ArchiveError):
        read_archive(path)
