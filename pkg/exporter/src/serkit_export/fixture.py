"""Golden parity fixtures: tiny random encoder + waveform + reference output.

Everything is derived from one pinned seed so regeneration is
byte-identical; the committed copies let the consumer's test suite check
forward-pass parity without torch installed.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
import torch

from .export import export_model

FIXTURE_SEED = 7
FIXTURE_SECONDS = 1.0
FIXTURE_RATE = 16000

TINY_KWARGS = dict(
    conv_dim=[32] * 7,
    conv_kernel=[10, 3, 3, 3, 3, 2, 2],
    conv_stride=[5, 2, 2, 2, 2, 2, 2],
    hidden_size=32,
    num_hidden_layers=2,
    num_attention_heads=4,
    intermediate_size=64,
    feat_extract_norm="group",
    conv_bias=False,
    do_stable_layer_norm=False,
    num_conv_pos_embeddings=128,
    num_conv_pos_embedding_groups=16,
)


def _write_pcm16_wav(path, samples: np.ndarray, rate: int) -> np.ndarray:
    """Write mono PCM16; returns the dequantized waveform actually stored."""
    pcm = np.clip(np.rint(samples * 32768.0), -32768, 32767).astype("<i2")
    body = pcm.tobytes()
    fmt = struct.pack("<HHIIHH", 1, 1, rate, rate * 2, 2, 16)
    chunks = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt + b"data" + struct.pack("<I", len(body)) + body
    Path(path).write_bytes(b"RIFF" + struct.pack("<I", len(chunks)) + chunks)
    return pcm.astype(np.float32) / 32768.0


def tiny_model(seed: int = FIXTURE_SEED):
    from transformers import Wav2Vec2Config, Wav2Vec2Model

    torch.manual_seed(seed)
    return Wav2Vec2Model(Wav2Vec2Config(**TINY_KWARGS)).eval()


def make_fixture(out_dir, seed: int = FIXTURE_SEED) -> dict:
    """Generate tiny_encoder.serta, fixture.wav, reference_output.npy."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model = tiny_model(seed)
    export_model(model, "wav2vec2", out / "tiny_encoder.serta", normalize_input=False, expected_sample_rate=FIXTURE_RATE)

    rng = np.random.default_rng(seed)
    raw = rng.uniform(-0.6, 0.6, int(FIXTURE_SECONDS * FIXTURE_RATE))
    wave = _write_pcm16_wav(out / "fixture.wav", raw, FIXTURE_RATE)

    threads = torch.get_num_threads()
    torch.set_num_threads(1)  # bitwise-stable reference
    try:
        with torch.no_grad():
            reference = model(torch.from_numpy(wave[None, :])).last_hidden_state[0].numpy()
    finally:
        torch.set_num_threads(threads)
    np.save(out / "reference_output.npy", reference.astype(np.float32))

    meta = {
        "seed": seed,
        "samples": int(wave.size),
        "sample_rate": FIXTURE_RATE,
        "frames": int(reference.shape[0]),
        "dim": int(reference.shape[1]),
    }
    (out / "fixture_meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return meta
