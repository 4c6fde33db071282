"""Exporter round-trips, fixture determinism, and torch parity."""

import json
from pathlib import Path

import numpy as np
import pytest
import torch

from serkit_export.export import ExportError, build_manifest, collect_tensors, export_model, load_source_model
from serkit_export.fixture import FIXTURE_SEED, make_fixture, tiny_model

from serkit.audio import AudioClip, read_wav
from serkit.encoder import extract, load_archive

REPO_FIXTURES = Path(__file__).resolve().parents[2] / "tests" / "fixtures"


def small_config(**overrides):
    from transformers import Wav2Vec2Config

    base = dict(
        conv_dim=[16] * 7,
        conv_kernel=[10, 3, 3, 3, 3, 2, 2],
        conv_stride=[5, 2, 2, 2, 2, 2, 2],
        hidden_size=24,
        num_hidden_layers=2,
        num_attention_heads=4,
        intermediate_size=48,
        feat_extract_norm="group",
        conv_bias=False,
        do_stable_layer_norm=False,
        num_conv_pos_embeddings=32,
        num_conv_pos_embedding_groups=8,
    )
    base.update(overrides)
    return Wav2Vec2Config(**base)


def torch_reference(model, wave: np.ndarray) -> np.ndarray:
    with torch.no_grad():
        return model(torch.from_numpy(wave[None, :].astype(np.float32))).last_hidden_state[0].numpy()


def assert_parity(mine, ref, rtol=1e-3, afloor=1e-4):
    assert mine.shape == ref.shape
    assert np.all(np.abs(mine - ref) <= np.maximum(rtol * np.abs(ref), afloor))


# --- round trip ----------------------------------------------------------------


def test_round_trip_checksums_exact(tmp_path):
    model = tiny_model(seed=11)
    path = tmp_path / "m.serta"
    export_model(model, "wav2vec2", path, normalize_input=False)
    loaded = load_archive(path)
    source = collect_tensors(model)
    assert set(loaded.tensors) == set(source)
    for name, arr in source.items():
        np.testing.assert_array_equal(loaded.tensors[name], arr, err_msg=name)


def test_manifest_fields(tmp_path):
    model = tiny_model(seed=2)
    path = tmp_path / "m.serta"
    manifest = export_model(model, "wav2vec2", path, normalize_input=True)
    assert manifest["hidden_dim"] == 32
    assert manifest["conv_layers"][0] == [32, 10, 5]
    assert manifest["conv_norm_mode"] == "group_norm_first_layer"
    assert manifest["normalize_input"] is True
    loaded = load_archive(path)
    assert loaded.manifest.normalize_input is True
    assert loaded.manifest.frame_count(16000) == 49


def test_fixture_archive_under_one_megabyte(tmp_path):
    make_fixture(tmp_path)
    assert (tmp_path / "tiny_encoder.serta").stat().st_size < 1_000_000


# --- fixture determinism ---------------------------------------------------------


def test_fixture_regeneration_matches_committed_bytes(tmp_path):
    assert REPO_FIXTURES.is_dir(), "committed fixtures missing"
    make_fixture(tmp_path, seed=FIXTURE_SEED)
    for name in ("tiny_encoder.serta", "fixture.wav", "reference_output.npy", "fixture_meta.json"):
        assert (tmp_path / name).read_bytes() == (REPO_FIXTURES / name).read_bytes(), name


def test_fixture_meta_shape_follows_stride_arithmetic(tmp_path):
    meta = make_fixture(tmp_path, seed=3)
    model = load_archive(tmp_path / "tiny_encoder.serta")
    assert meta["frames"] == model.manifest.frame_count(meta["samples"])
    assert meta["dim"] == 32
    ref = np.load(tmp_path / "reference_output.npy")
    assert ref.shape == (meta["frames"], meta["dim"])


# --- parity across architecture variants ------------------------------------------


def test_post_norm_parity(tmp_path):
    from transformers import Wav2Vec2Model

    torch.manual_seed(21)
    model = Wav2Vec2Model(small_config()).eval()
    path = tmp_path / "post.serta"
    export_model(model, "wav2vec2", path, normalize_input=False)
    rng = np.random.default_rng(0)
    wave = rng.uniform(-0.5, 0.5, 8000).astype(np.float32)
    mine = extract(AudioClip(wave, 16000), load_archive(path))
    assert_parity(mine, torch_reference(model, wave))


def test_pre_norm_layer_norm_conv_bias_parity(tmp_path):
    from transformers import Wav2Vec2Model

    torch.manual_seed(22)
    model = Wav2Vec2Model(
        small_config(feat_extract_norm="layer", conv_bias=True, do_stable_layer_norm=True)
    ).eval()
    path = tmp_path / "pre.serta"
    manifest = export_model(model, "wav2vec2", path, normalize_input=False)
    assert manifest["norm_first"] is True and manifest["conv_norm_mode"] == "layer_norm_all"
    rng = np.random.default_rng(1)
    wave = rng.uniform(-0.5, 0.5, 8000).astype(np.float32)
    mine = extract(AudioClip(wave, 16000), load_archive(path))
    assert_parity(mine, torch_reference(model, wave))


def test_hubert_export_and_parity(tmp_path):
    from transformers import HubertConfig, HubertModel

    torch.manual_seed(23)
    cfg = HubertConfig(
        conv_dim=[16] * 7,
        conv_kernel=[10, 3, 3, 3, 3, 2, 2],
        conv_stride=[5, 2, 2, 2, 2, 2, 2],
        hidden_size=24,
        num_hidden_layers=2,
        num_attention_heads=4,
        intermediate_size=48,
        feat_extract_norm="group",
        conv_bias=False,
        do_stable_layer_norm=False,
        num_conv_pos_embeddings=32,
        num_conv_pos_embedding_groups=8,
    )
    model = HubertModel(cfg).eval()
    path = tmp_path / "hubert.serta"
    manifest = export_model(model, "hubert", path, normalize_input=False)
    assert manifest["model_family"] == "hubert"
    rng = np.random.default_rng(2)
    wave = rng.uniform(-0.5, 0.5, 6000).astype(np.float32)
    mine = extract(AudioClip(wave, 16000), load_archive(path))
    assert_parity(mine, torch_reference(model, wave))


def test_parity_against_committed_reference():
    model = load_archive(REPO_FIXTURES / "tiny_encoder.serta")
    clip = read_wav(REPO_FIXTURES / "fixture.wav")
    ref = np.load(REPO_FIXTURES / "reference_output.npy")
    assert_parity(extract(clip, model), ref)


# --- error paths -------------------------------------------------------------------


def test_unknown_family_rejected(tmp_path):
    (tmp_path / "config.json").write_text(json.dumps({"model_type": "bert"}))
    with pytest.raises(ExportError, match="model_type"):
        load_source_model(str(tmp_path))


def test_unsupported_feature_norm_rejected():
    model = tiny_model(seed=1)
    model.config.feat_extract_norm = "batch"
    with pytest.raises(ExportError, match="feat_extract_norm"):
        build_manifest(model, "wav2vec2", normalize_input=False, expected_sample_rate=16000)
