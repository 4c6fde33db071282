"""Map pretrained Wav2Vec2/HuBERT checkpoints onto the tensor archive."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .archive_writer import write_archive


class ExportError(Exception):
    """Checkpoint uses a configuration this exporter cannot represent."""


@dataclass
class ExportSpec:
    source: str  # model id or local directory
    target: str  # archive path to write
    normalize_input: bool | None = None  # None = resolve from preprocessor config
    expected_sample_rate: int = 16000


def _effective_weight(module: torch.nn.Module) -> torch.Tensor:
    """Materialize the conv weight, undoing weight-norm parametrization."""
    # Both the parametrizations API and legacy weight_norm expose a
    # recomputed .weight; reading it is version-proof.
    return module.weight.detach()


def _np(t: torch.Tensor) -> np.ndarray:
    return t.detach().cpu().numpy().astype(np.float32)


def load_source_model(source: str):
    from transformers import AutoConfig, HubertModel, Wav2Vec2Model

    config = AutoConfig.from_pretrained(source)
    if config.model_type == "wav2vec2":
        return Wav2Vec2Model.from_pretrained(source).eval(), "wav2vec2"
    if config.model_type == "hubert":
        return HubertModel.from_pretrained(source).eval(), "hubert"
    raise ExportError(f"model_type={config.model_type!r} is not a supported encoder family")


def build_manifest(model, family: str, normalize_input: bool, expected_sample_rate: int) -> dict:
    cfg = model.config
    if cfg.feat_extract_norm not in ("group", "layer"):
        raise ExportError(f"feat_extract_norm={cfg.feat_extract_norm!r} unsupported")
    if family == "hubert" and not getattr(cfg, "feat_proj_layer_norm", True):
        raise ExportError("feat_proj_layer_norm=False variants are unsupported")
    return {
        "kind": "encoder",
        "model_family": family,
        "hidden_dim": cfg.hidden_size,
        "num_layers": cfg.num_hidden_layers,
        "num_heads": cfg.num_attention_heads,
        "ff_dim": cfg.intermediate_size,
        "conv_layers": [list(t) for t in zip(cfg.conv_dim, cfg.conv_kernel, cfg.conv_stride)],
        "conv_norm_mode": "group_norm_first_layer" if cfg.feat_extract_norm == "group" else "layer_norm_all",
        "conv_bias": bool(cfg.conv_bias),
        "pos_conv_kernel": cfg.num_conv_pos_embeddings,
        "pos_conv_groups": cfg.num_conv_pos_embedding_groups,
        "norm_first": bool(cfg.do_stable_layer_norm),
        "layer_norm_eps": cfg.layer_norm_eps,
        "normalize_input": bool(normalize_input),
        "expected_sample_rate": int(expected_sample_rate),
    }


def collect_tensors(model) -> dict[str, np.ndarray]:
    cfg = model.config
    tensors: dict[str, np.ndarray] = {}

    for i, layer in enumerate(model.feature_extractor.conv_layers):
        tensors[f"conv.{i}.weight"] = _np(layer.conv.weight)
        if cfg.conv_bias:
            tensors[f"conv.{i}.bias"] = _np(layer.conv.bias)
        if cfg.feat_extract_norm == "layer" or (cfg.feat_extract_norm == "group" and i == 0):
            tensors[f"conv_norm.{i}.gamma"] = _np(layer.layer_norm.weight)
            tensors[f"conv_norm.{i}.beta"] = _np(layer.layer_norm.bias)

    fp = model.feature_projection
    tensors["proj_norm.gamma"] = _np(fp.layer_norm.weight)
    tensors["proj_norm.beta"] = _np(fp.layer_norm.bias)
    tensors["proj.weight"] = _np(fp.projection.weight)
    tensors["proj.bias"] = _np(fp.projection.bias)

    pos = model.encoder.pos_conv_embed.conv
    tensors["pos_conv.weight"] = _np(_effective_weight(pos))
    tensors["pos_conv.bias"] = _np(pos.bias)
    tensors["enc_norm.gamma"] = _np(model.encoder.layer_norm.weight)
    tensors["enc_norm.beta"] = _np(model.encoder.layer_norm.bias)

    for i, layer in enumerate(model.encoder.layers):
        p = f"enc.{i}"
        attn = layer.attention
        for name, proj in (("q", attn.q_proj), ("k", attn.k_proj), ("v", attn.v_proj), ("out", attn.out_proj)):
            tensors[f"{p}.attn.{name}.weight"] = _np(proj.weight)
            tensors[f"{p}.attn.{name}.bias"] = _np(proj.bias)
        tensors[f"{p}.norm1.gamma"] = _np(layer.layer_norm.weight)
        tensors[f"{p}.norm1.beta"] = _np(layer.layer_norm.bias)
        tensors[f"{p}.ff.w1.weight"] = _np(layer.feed_forward.intermediate_dense.weight)
        tensors[f"{p}.ff.w1.bias"] = _np(layer.feed_forward.intermediate_dense.bias)
        tensors[f"{p}.ff.w2.weight"] = _np(layer.feed_forward.output_dense.weight)
        tensors[f"{p}.ff.w2.bias"] = _np(layer.feed_forward.output_dense.bias)
        tensors[f"{p}.norm2.gamma"] = _np(layer.final_layer_norm.weight)
        tensors[f"{p}.norm2.beta"] = _np(layer.final_layer_norm.bias)
    return tensors


def _resolve_normalize(source: str) -> bool:
    from transformers import AutoFeatureExtractor

    try:
        fe = AutoFeatureExtractor.from_pretrained(source)
    except Exception as exc:  # no preprocessor config shipped
        raise ExportError(
            f"cannot resolve do_normalize from {source!r}; pass --normalize-input yes/no explicitly"
        ) from exc
    return bool(getattr(fe, "do_normalize", False))


def export_model(model, family: str, target, normalize_input: bool, expected_sample_rate: int = 16000) -> dict:
    """Write an in-memory model to an archive; returns the manifest."""
    manifest = build_manifest(model, family, normalize_input, expected_sample_rate)
    with torch.no_grad():
        tensors = collect_tensors(model)
    write_archive(target, manifest, tensors)
    return manifest


def export(spec: ExportSpec) -> dict:
    """Convert a published checkpoint per the export spec."""
    model, family = load_source_model(spec.source)
    normalize = spec.normalize_input if spec.normalize_input is not None else _resolve_normalize(spec.source)
    Path(spec.target).parent.mkdir(parents=True, exist_ok=True)
    return export_model(model, family, spec.target, normalize, spec.expected_sample_rate)
