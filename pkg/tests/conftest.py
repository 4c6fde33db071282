import numpy as np
import pytest

CANONICAL_KERNELS = (10, 3, 3, 3, 3, 2, 2)
CANONICAL_STRIDES = (5, 2, 2, 2, 2, 2, 2)


def tiny_manifest(
    conv_norm_mode="group_norm_first_layer",
    norm_first=False,
    normalize_input=False,
    sample_rate=16000,
    channels=8,
    hidden_dim=16,
    num_layers=2,
    num_heads=2,
    ff_dim=32,
    pos_conv_kernel=16,
    pos_conv_groups=4,
    conv_bias=False,
):
    from serkit.encoder import EncoderManifest

    conv = tuple((channels, k, s) for k, s in zip(CANONICAL_KERNELS, CANONICAL_STRIDES))
    return EncoderManifest(
        model_family="wav2vec2",
        hidden_dim=hidden_dim,
        num_layers=num_layers,
        num_heads=num_heads,
        ff_dim=ff_dim,
        conv_layers=conv,
        conv_norm_mode=conv_norm_mode,
        conv_bias=conv_bias,
        pos_conv_kernel=pos_conv_kernel,
        pos_conv_groups=pos_conv_groups,
        norm_first=norm_first,
        normalize_input=normalize_input,
        expected_sample_rate=sample_rate,
    )


def random_tensors(manifest, seed=0, zero=False):
    rng = np.random.default_rng(seed)
    tensors = {}
    for name, shape in manifest.expected_tensors().items():
        if name.endswith(".gamma"):
            tensors[name] = np.ones(shape, np.float32) if zero else (1 + 0.1 * rng.normal(size=shape)).astype(np.float32)
        elif name.endswith(".beta") or zero:
            tensors[name] = np.zeros(shape, np.float32) if zero else (0.05 * rng.normal(size=shape)).astype(np.float32)
        else:
            fan_in = int(np.prod(shape[1:])) if len(shape) > 1 else shape[0]
            scale = 0.7 / np.sqrt(max(fan_in, 1))
            tensors[name] = (scale * rng.normal(size=shape)).astype(np.float32)
    return tensors


def write_tiny_model(path, manifest, seed=0, zero=False):
    from serkit.archive import write_archive
    from serkit.encoder import load_archive

    write_archive(path, manifest.to_dict(), random_tensors(manifest, seed=seed, zero=zero))
    return load_archive(path)


@pytest.fixture(scope="session")
def fixture_dir():
    from pathlib import Path

    d = Path(__file__).parent / "fixtures"
    if not d.is_dir():
        pytest.skip("fixture directory not present")
    return d


@pytest.fixture(scope="session")
def tiny_model(fixture_dir):
    from serkit.encoder import load_archive

    path = fixture_dir / "tiny_encoder.serta"
    if not path.exists():
        pytest.skip("tiny encoder fixture not present")
    return load_archive(path)


@pytest.fixture(scope="session")
def fixture_clip(fixture_dir):
    from serkit.audio import read_wav

    path = fixture_dir / "fixture.wav"
    if not path.exists():
        pytest.skip("fixture wav not present")
    return read_wav(path)
