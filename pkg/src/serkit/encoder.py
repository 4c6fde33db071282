"""Frozen self-supervised speech encoder: archive loading + forward pass.

The encoder is pure inference.  Architecture hyperparameters all come from
the archive manifest, never from code, so base (768-dim) and large
(1024-dim) checkpoints of either supported family run through the same
path.  The forward pass is:

    waveform -> conv feature extractor -> latent frames (n, c_last)
             -> feature projection -> positional conv embedding
             -> transformer stack  -> contextual features (n, hidden_dim)
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import ops
from .archive import read_archive
from .audio import AudioClip, normalize, resample
from .errors import ArchiveError, InputTooShortError, ShapeError

MODEL_FAMILIES = ("wav2vec2", "hubert")
CONV_NORM_MODES = ("group_norm_first_layer", "layer_norm_all")

# Clips longer than this are encoded in consecutive chunks whose feature
# rows are concatenated; mean pooling downstream makes that equivalent to
# a length-weighted mean.
CHUNK_SECONDS = 30

AttentionHook = Callable[[int, np.ndarray], None]


@dataclass(frozen=True)
class EncoderManifest:
    """Architecture description stored in the tensor archive."""

    model_family: str
    hidden_dim: int
    num_layers: int
    num_heads: int
    ff_dim: int
    conv_layers: tuple[tuple[int, int, int], ...]  # (channels, kernel, stride)
    conv_norm_mode: str
    conv_bias: bool
    pos_conv_kernel: int
    pos_conv_groups: int
    norm_first: bool
    normalize_input: bool
    expected_sample_rate: int
    layer_norm_eps: float = 1e-5

    def __post_init__(self):
        object.__setattr__(self, "conv_layers", tuple(tuple(int(v) for v in layer) for layer in self.conv_layers))
        if self.model_family not in MODEL_FAMILIES:
            raise ArchiveError(f"unknown model family {self.model_family!r}")
        if self.conv_norm_mode not in CONV_NORM_MODES:
            raise ArchiveError(f"unknown conv norm mode {self.conv_norm_mode!r}")
        if self.hidden_dim <= 0 or self.num_heads <= 0 or self.hidden_dim % self.num_heads != 0:
            raise ArchiveError(f"hidden_dim {self.hidden_dim} not divisible by num_heads {self.num_heads}")
        if self.num_layers < 1 or self.ff_dim < 1:
            raise ArchiveError("num_layers and ff_dim must be positive")
        if not self.conv_layers:
            raise ArchiveError("conv stack is empty")
        for ch, k, s in self.conv_layers:
            if ch < 1 or k < 1 or s < 1:
                raise ArchiveError(f"bad conv layer spec ({ch}, {k}, {s})")
        if self.hidden_dim % self.pos_conv_groups != 0:
            raise ArchiveError(f"pos conv groups {self.pos_conv_groups} must divide hidden_dim")
        if self.expected_sample_rate <= 0:
            raise ArchiveError("expected_sample_rate must be positive")

    @classmethod
    def from_dict(cls, raw: dict) -> "EncoderManifest":
        fields = (
            "model_family hidden_dim num_layers num_heads ff_dim conv_layers conv_norm_mode "
            "conv_bias pos_conv_kernel pos_conv_groups norm_first normalize_input expected_sample_rate"
        ).split()
        missing = [f for f in fields if f not in raw]
        if missing:
            raise ArchiveError(f"manifest missing fields: {', '.join(missing)}")
        return cls(
            **{f: raw[f] for f in fields},
            layer_norm_eps=float(raw.get("layer_norm_eps", 1e-5)),
        )

    def to_dict(self) -> dict:
        return {
            "kind": "encoder",
            "model_family": self.model_family,
            "hidden_dim": self.hidden_dim,
            "num_layers": self.num_layers,
            "num_heads": self.num_heads,
            "ff_dim": self.ff_dim,
            "conv_layers": [list(layer) for layer in self.conv_layers],
            "conv_norm_mode": self.conv_norm_mode,
            "conv_bias": self.conv_bias,
            "pos_conv_kernel": self.pos_conv_kernel,
            "pos_conv_groups": self.pos_conv_groups,
            "norm_first": self.norm_first,
            "normalize_input": self.normalize_input,
            "expected_sample_rate": self.expected_sample_rate,
            "layer_norm_eps": self.layer_norm_eps,
        }

    def expected_tensors(self) -> dict[str, tuple[int, ...]]:
        """Canonical name -> shape map for every tensor the forward pass reads."""
        d, ff = self.hidden_dim, self.ff_dim
        shapes: dict[str, tuple[int, ...]] = {}
        c_in = 1
        for i, (ch, k, _s) in enumerate(self.conv_layers):
            shapes[f"conv.{i}.weight"] = (ch, c_in, k)
            if self.conv_bias:
                shapes[f"conv.{i}.bias"] = (ch,)
            if self.conv_norm_mode == "layer_norm_all" or i == 0:
                shapes[f"conv_norm.{i}.gamma"] = (ch,)
                shapes[f"conv_norm.{i}.beta"] = (ch,)
            c_in = ch
        c_last = self.conv_layers[-1][0]
        shapes["proj_norm.gamma"] = (c_last,)
        shapes["proj_norm.beta"] = (c_last,)
        shapes["proj.weight"] = (d, c_last)
        shapes["proj.bias"] = (d,)
        shapes["pos_conv.weight"] = (d, d // self.pos_conv_groups, self.pos_conv_kernel)
        shapes["pos_conv.bias"] = (d,)
        shapes["enc_norm.gamma"] = (d,)
        shapes["enc_norm.beta"] = (d,)
        for i in range(self.num_layers):
            p = f"enc.{i}"
            for proj in ("q", "k", "v", "out"):
                shapes[f"{p}.attn.{proj}.weight"] = (d, d)
                shapes[f"{p}.attn.{proj}.bias"] = (d,)
            shapes[f"{p}.norm1.gamma"] = (d,)
            shapes[f"{p}.norm1.beta"] = (d,)
            shapes[f"{p}.ff.w1.weight"] = (ff, d)
            shapes[f"{p}.ff.w1.bias"] = (ff,)
            shapes[f"{p}.ff.w2.weight"] = (d, ff)
            shapes[f"{p}.ff.w2.bias"] = (d,)
            shapes[f"{p}.norm2.gamma"] = (d,)
            shapes[f"{p}.norm2.beta"] = (d,)
        return shapes

    def frame_count(self, n_samples: int) -> int:
        """Compose the conv length formula layer by layer."""
        n = n_samples
        for _ch, k, s in self.conv_layers:
            if n < k:
                raise InputTooShortError(
                    f"{n_samples} samples shorter than the conv receptive field",
                    min_samples=self.min_samples,
                )
            n = (n - k) // s + 1
        return n

    @property
    def min_samples(self) -> int:
        """Smallest input producing one latent frame (formula inverse)."""
        n = 1
        for _ch, k, s in reversed(self.conv_layers):
            n = (n - 1) * s + k
        return n


@dataclass(frozen=True)
class EncoderModel:
    """Immutable loaded encoder: manifest + named weight arrays."""

    manifest: EncoderManifest
    tensors: dict[str, np.ndarray]
    checkpoint_hash: str = ""

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]


def load_archive(path) -> EncoderModel:
    """Load and shape-validate an encoder archive."""
    raw, tensors = read_archive(path)
    if raw.get("kind", "encoder") != "encoder":
        raise ArchiveError(f"{path}: archive holds a {raw.get('kind')!r} checkpoint, not an encoder")
    manifest = EncoderManifest.from_dict(raw)
    for name, shape in manifest.expected_tensors().items():
        if name not in tensors:
            raise ArchiveError(f"{path}: missing tensor {name!r}")
        found = tensors[name].shape
        if tuple(found) != shape:
            raise ArchiveError(f"{path}: tensor {name!r} has shape {tuple(found)}, expected {shape}")
        if not np.all(np.isfinite(tensors[name])):
            raise ArchiveError(f"{path}: tensor {name!r} contains non-finite values")
    for arr in tensors.values():
        arr.flags.writeable = False
    digest = hashlib.sha256(open(path, "rb").read()).hexdigest()
    return EncoderModel(manifest=manifest, tensors=tensors, checkpoint_hash=digest)


def conv_feature_encoder(clip: AudioClip, model: EncoderModel) -> np.ndarray:
    """Run the conv stack: latent frames, shape (n, last conv channels)."""
    m = model.manifest
    if clip.sample_rate != m.expected_sample_rate:
        raise ShapeError(f"clip at {clip.sample_rate} Hz, model expects {m.expected_sample_rate} Hz")
    if clip.samples.size < m.min_samples:
        raise InputTooShortError(
            f"{clip.samples.size} samples < minimum {m.min_samples}",
            min_samples=m.min_samples,
        )
    x = clip.samples[None, :]
    for i, (_ch, _k, stride) in enumerate(m.conv_layers):
        bias = model.tensors.get(f"conv.{i}.bias")
        x = ops.conv1d(x, model[f"conv.{i}.weight"], stride=stride, bias=bias)
        if m.conv_norm_mode == "layer_norm_all":
            # Per-frame layer norm across channels.
            x = ops.layer_norm(x.T, model[f"conv_norm.{i}.gamma"], model[f"conv_norm.{i}.beta"], m.layer_norm_eps).T
        elif i == 0:
            # Per-channel standardization over time (groups == channels).
            x = ops.group_norm(x, x.shape[0], model["conv_norm.0.gamma"], model["conv_norm.0.beta"], m.layer_norm_eps)
        x = ops.gelu(x)
    return np.ascontiguousarray(x.T)


def _positional_conv(h: np.ndarray, model: EncoderModel) -> np.ndarray:
    """Grouped conv positional embedding over time, same length out as in."""
    m = model.manifest
    k = m.pos_conv_kernel
    pad = k // 2
    x = np.concatenate([np.zeros((h.shape[1], pad), np.float32), h.T, np.zeros((h.shape[1], pad), np.float32)], axis=1)
    emb = ops.conv1d(x, model["pos_conv.weight"], stride=1, groups=m.pos_conv_groups, bias=model["pos_conv.bias"])
    if k % 2 == 0:
        emb = emb[:, :-1]
    return ops.gelu(emb).T


def _self_attention(h: np.ndarray, model: EncoderModel, layer: int, hook: AttentionHook | None) -> np.ndarray:
    m = model.manifest
    n, d = h.shape
    heads, hd = m.num_heads, d // m.num_heads
    p = f"enc.{layer}.attn"
    q = (ops.matmul(h, model[f"{p}.q.weight"].T) + model[f"{p}.q.bias"]) * np.float32(hd**-0.5)
    key = ops.matmul(h, model[f"{p}.k.weight"].T) + model[f"{p}.k.bias"]
    v = ops.matmul(h, model[f"{p}.v.weight"].T) + model[f"{p}.v.bias"]
    q = q.reshape(n, heads, hd).transpose(1, 0, 2)
    key = key.reshape(n, heads, hd).transpose(1, 0, 2)
    v = v.reshape(n, heads, hd).transpose(1, 0, 2)
    attn = ops.softmax(q @ key.transpose(0, 2, 1))
    if hook is not None:
        hook(layer, attn)
    ctx = (attn @ v).transpose(1, 0, 2).reshape(n, d)
    return ops.matmul(ctx, model[f"{p}.out.weight"].T) + model[f"{p}.out.bias"]


def _feed_forward(h: np.ndarray, model: EncoderModel, layer: int) -> np.ndarray:
    p = f"enc.{layer}.ff"
    inner = ops.gelu(ops.matmul(h, model[f"{p}.w1.weight"].T) + model[f"{p}.w1.bias"])
    return ops.matmul(inner, model[f"{p}.w2.weight"].T) + model[f"{p}.w2.bias"]


def transformer_context(z: np.ndarray, model: EncoderModel, attention_hook: AttentionHook | None = None) -> np.ndarray:
    """Contextualize latent frames: (n, c_last) -> (n, hidden_dim)."""
    m = model.manifest
    z = np.asarray(z, dtype=np.float32)
    c_last = m.conv_layers[-1][0]
    if z.ndim != 2 or z.shape[1] != c_last:
        raise ShapeError(f"latent frames shaped {z.shape}, expected (n, {c_last})")
    eps = m.layer_norm_eps

    h = ops.layer_norm(z, model["proj_norm.gamma"], model["proj_norm.beta"], eps)
    h = ops.matmul(h, model["proj.weight"].T) + model["proj.bias"]
    h = h + _positional_conv(h, model)
    if not m.norm_first:
        h = ops.layer_norm(h, model["enc_norm.gamma"], model["enc_norm.beta"], eps)

    for i in range(m.num_layers):
        g1, b1 = model[f"enc.{i}.norm1.gamma"], model[f"enc.{i}.norm1.beta"]
        g2, b2 = model[f"enc.{i}.norm2.gamma"], model[f"enc.{i}.norm2.beta"]
        if m.norm_first:
            h = h + _self_attention(ops.layer_norm(h, g1, b1, eps), model, i, attention_hook)
            h = h + _feed_forward(ops.layer_norm(h, g2, b2, eps), model, i)
        else:
            h = ops.layer_norm(h + _self_attention(h, model, i, attention_hook), g1, b1, eps)
            h = ops.layer_norm(h + _feed_forward(h, model, i), g2, b2, eps)

    if m.norm_first:
        h = ops.layer_norm(h, model["enc_norm.gamma"], model["enc_norm.beta"], eps)
    return h


def extract(clip: AudioClip, model: EncoderModel, attention_hook: AttentionHook | None = None) -> np.ndarray:
    """Full feature extraction for one utterance: (n, hidden_dim) matrix.

    Resamples to the manifest rate when needed, standardizes when the
    manifest asks for it, and splits clips longer than CHUNK_SECONDS into
    consecutive chunks concatenated along time.
    """
    m = model.manifest
    if clip.sample_rate != m.expected_sample_rate:
        clip = resample(clip, m.expected_sample_rate)
    if m.normalize_input:
        clip = normalize(clip)

    max_samples = CHUNK_SECONDS * m.expected_sample_rate
    samples = clip.samples
    if samples.size <= max_samples:
        starts = [0]
    else:
        starts = list(range(0, samples.size, max_samples))
        # A sub-receptive-field tail is folded into the previous chunk.
        if samples.size - starts[-1] < m.min_samples:
            starts.pop()

    parts = []
    for idx, start in enumerate(starts):
        end = samples.size if idx == len(starts) - 1 else starts[idx + 1]
        chunk = AudioClip(samples[start:end], clip.sample_rate, clip.source_path)
        z = conv_feature_encoder(chunk, model)
        parts.append(transformer_context(z, model, attention_hook))
    features = parts[0] if len(parts) == 1 else np.concatenate(parts, axis=0)
    if not np.all(np.isfinite(features)):
        raise ShapeError("encoder produced non-finite features")
    return features
