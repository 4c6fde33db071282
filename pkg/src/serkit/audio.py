"""Audio frontend: WAV decoding, resampling, per-utterance standardization.

The pipeline consumes 16 kHz mono float waveforms; everything here exists
to turn RIFF/WAVE files (PCM16 or IEEE float32, mono or stereo) into that
canonical form deterministically.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import EmptyAudioError, FormatError, UnsupportedError

_AMP_TOL = 1e-6
_NORM_EPS = 1e-7

# Windowed-sinc interpolation: 64 taps per output sample, Kaiser beta 8.6
# (~85 dB stopband over the covered lobes).
_HALF_TAPS = 32
_KAISER_BETA = 8.6


@dataclass(frozen=True)
class AudioClip:
    """Decoded mono waveform.  samples is a read-only float32 array."""

    samples: np.ndarray
    sample_rate: int
    source_path: str | None = None

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float32).reshape(-1)
        if arr.size == 0:
            raise EmptyAudioError("clip has no samples")
        if not np.all(np.isfinite(arr)):
            raise FormatError("clip contains non-finite samples")
        if int(self.sample_rate) <= 0:
            raise FormatError(f"sample rate must be positive, got {self.sample_rate}")
        # Freeze a private copy unless the caller handed us an already
        # read-only buffer (sharing between clips is then safe).
        if isinstance(self.samples, np.ndarray) and arr.flags.writeable and np.shares_memory(arr, self.samples):
            arr = arr.copy()
        if arr.flags.writeable:
            arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


def _parse_chunks(data: bytes):
    """Yield (chunk id, payload) pairs of a RIFF body, honoring pad bytes."""
    pos = 12
    while pos + 8 <= len(data):
        cid = data[pos : pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        start = pos + 8
        if start + size > len(data):
            raise FormatError(f"chunk {cid!r} declares {size} bytes beyond end of file")
        yield cid, data[start : start + size]
        pos = start + size + (size & 1)


def decode_wav(data: bytes, source_path: str | None = None) -> AudioClip:
    """Decode a RIFF/WAVE byte string into a mono AudioClip.

    PCM16 samples map to value/32768; stereo is downmixed by per-sample
    channel average.
    """
    if len(data) < 12 or data[0:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise FormatError("not a RIFF/WAVE container")

    fmt = None
    payload = None
    for cid, body in _parse_chunks(data):
        if cid == b"fmt " and fmt is None:
            if len(body) < 16:
                raise FormatError("fmt chunk shorter than 16 bytes")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif cid == b"data" and payload is None:
            payload = body
    if fmt is None or payload is None:
        raise FormatError("missing fmt or data chunk")

    audio_format, channels, rate, _byte_rate, _block_align, bits = fmt
    if rate == 0:
        raise FormatError("sample rate of zero")
    if channels not in (1, 2):
        raise UnsupportedError(f"{channels} channels unsupported (mono/stereo only)")
    if audio_format == 1 and bits == 16:
        dtype, scale = np.dtype("<i2"), 1.0 / 32768.0
    elif audio_format == 3 and bits == 32:
        dtype, scale = np.dtype("<f4"), 1.0
    else:
        raise UnsupportedError(f"format code {audio_format} at {bits} bits unsupported")

    if len(payload) == 0:
        raise EmptyAudioError("data chunk is empty")
    frame_bytes = channels * dtype.itemsize
    if len(payload) % frame_bytes != 0:
        raise FormatError("data chunk is not a whole number of frames")

    samples = np.frombuffer(payload, dtype=dtype).astype(np.float32) * np.float32(scale)
    if channels == 2:
        samples = samples.reshape(-1, 2).mean(axis=1)
    if not np.all(np.isfinite(samples)):
        raise FormatError("non-finite sample values")
    if np.abs(samples).max() > 1.0 + _AMP_TOL:
        raise FormatError("sample amplitudes exceed full scale")
    return AudioClip(samples=samples, sample_rate=rate, source_path=source_path)


def read_wav(path) -> AudioClip:
    with open(path, "rb") as fh:
        return decode_wav(fh.read(), source_path=str(path))


def encode_wav(samples: np.ndarray, sample_rate: int, sample_format: str = "pcm16") -> bytes:
    """Encode samples (n,) mono or (n, channels) into RIFF/WAVE bytes."""
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    n, channels = arr.shape
    if sample_format == "pcm16":
        pcm = np.clip(np.rint(arr * 32768.0), -32768, 32767).astype("<i2")
        body, bits, code = pcm.tobytes(), 16, 1
    elif sample_format == "float32":
        body, bits, code = arr.astype("<f4").tobytes(), 32, 3
    else:
        raise ValueError(f"unknown sample format {sample_format!r}")
    block_align = channels * bits // 8
    fmt = struct.pack("<HHIIHH", code, channels, sample_rate, sample_rate * block_align, block_align, bits)
    chunks = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt + b"data" + struct.pack("<I", len(body)) + body
    return b"RIFF" + struct.pack("<I", len(chunks)) + chunks


def _filter_bank(upsample: int, cutoff: float) -> np.ndarray:
    """Polyphase windowed-sinc bank, one row of 64 taps per phase.

    Each row is normalized to unit DC gain so constant inputs pass through
    at amplitude.
    """
    j = np.arange(-(_HALF_TAPS - 1), _HALF_TAPS + 1, dtype=np.float64)
    phases = np.arange(upsample, dtype=np.float64)[:, None] / upsample
    u = j[None, :] - phases
    window = np.i0(_KAISER_BETA * np.sqrt(np.clip(1.0 - (u / _HALF_TAPS) ** 2, 0.0, 1.0))) / np.i0(_KAISER_BETA)
    bank = cutoff * np.sinc(cutoff * u) * window
    return bank / bank.sum(axis=1, keepdims=True)


def resample(clip: AudioClip, target_rate: int) -> AudioClip:
    """Resample to target_rate with a 64-tap Kaiser-windowed polyphase sinc."""
    target_rate = int(target_rate)
    if target_rate <= 0:
        raise ValueError(f"target rate must be positive, got {target_rate}")
    if target_rate == clip.sample_rate:
        return AudioClip(clip.samples, clip.sample_rate, clip.source_path)

    g = math.gcd(clip.sample_rate, target_rate)
    up, down = target_rate // g, clip.sample_rate // g
    x = clip.samples.astype(np.float64)
    n_out = (x.size * up + down // 2) // down
    bank = _filter_bank(up, cutoff=min(1.0, up / down))

    pad = _HALF_TAPS + 1
    xp = np.concatenate([np.zeros(pad), x, np.zeros(pad)])
    offsets = np.arange(-(_HALF_TAPS - 1), _HALF_TAPS + 1)
    out = np.empty(n_out, dtype=np.float64)
    # Chunked gather keeps the (block, 64) index matrix small for long clips.
    block = 1 << 16
    for lo in range(0, n_out, block):
        n = np.arange(lo, min(lo + block, n_out))
        step = n * down
        base, phase = step // up, step % up
        idx = base[:, None] + offsets[None, :] + pad
        out[lo : lo + n.size] = (xp[idx] * bank[phase]).sum(axis=1)
    return AudioClip(out.astype(np.float32), target_rate, clip.source_path)


def normalize(clip: AudioClip) -> AudioClip:
    """Standardize to zero mean / unit variance (population convention).

    Inputs with variance below 1e-7 come back as all zeros.
    """
    x = clip.samples.astype(np.float64)
    var = x.var()
    if var < _NORM_EPS:
        y = np.zeros_like(x)
    else:
        y = (x - x.mean()) / np.sqrt(var + _NORM_EPS)
    return AudioClip(y.astype(np.float32), clip.sample_rate, clip.source_path)
