"""On-disk embedding cache.

One directory per (checkpoint, preprocessing) combination: a meta file
pins the provenance, then one .npz per utterance keyed by a digest of its
path.  Extraction is resumable; reuse under a different checkpoint or
preprocessing setup is refused rather than silently accepted.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .datasets import UtteranceRecord
from .encoder import EncoderModel
from .errors import ConfigError

_META_NAME = "cache_meta.json"


def cache_meta(model: EncoderModel) -> dict:
    return {
        "checkpoint_hash": model.checkpoint_hash,
        "normalize_input": model.manifest.normalize_input,
        "expected_sample_rate": model.manifest.expected_sample_rate,
        "dim": model.manifest.hidden_dim,
    }


def prepare_cache(cache_dir, model: EncoderModel) -> Path:
    """Create the cache dir or validate that it matches this model."""
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    meta_path = cache_dir / _META_NAME
    meta = cache_meta(model)
    if meta_path.exists():
        existing = json.loads(meta_path.read_text())
        if existing != meta:
            raise ConfigError(
                f"{cache_dir} was built with checkpoint {existing.get('checkpoint_hash', '?')[:12]} "
                f"/ flags {existing}, not this model; use a fresh --cache-dir"
            )
    else:
        meta_path.write_text(json.dumps(meta, sort_keys=True, indent=2))
    return cache_dir


def entry_path(cache_dir, record: UtteranceRecord) -> Path:
    digest = hashlib.sha256(record.path.encode("utf-8")).hexdigest()[:24]
    return Path(cache_dir) / f"{digest}.npz"


def store_embedding(cache_dir, record: UtteranceRecord, vector: np.ndarray) -> None:
    path = entry_path(cache_dir, record)
    tmp = path.with_suffix(".tmp.npz")
    with open(tmp, "wb") as fh:
        np.savez(
            fh,
            vector=np.asarray(vector, dtype=np.float32),
            path=np.array(record.path),
            label=np.array(record.label),
            dim=np.array(vector.shape[0]),
        )
    tmp.replace(path)


def load_embedding(cache_dir, record: UtteranceRecord) -> np.ndarray:
    path = entry_path(cache_dir, record)
    if not path.exists():
        raise ConfigError(
            f"no cached embedding for {record.path}; run `serkit extract` with this manifest and checkpoint first"
        )
    with np.load(path) as data:
        if str(data["path"]) != record.path:
            raise ConfigError(f"{path}: cache entry belongs to {data['path']}, not {record.path}")
        return data["vector"].astype(np.float32)


def load_all(cache_dir, records, model: EncoderModel) -> dict[str, np.ndarray]:
    """Load every record's embedding, validating cache provenance first."""
    cache_dir = Path(cache_dir)
    meta_path = cache_dir / _META_NAME
    if not meta_path.exists():
        raise ConfigError(f"{cache_dir} is not an embedding cache; run `serkit extract` first")
    existing = json.loads(meta_path.read_text())
    if existing != cache_meta(model):
        raise ConfigError(
            f"{cache_dir} was built with a different checkpoint or preprocessing ({existing}); "
            "re-run `serkit extract` into a fresh --cache-dir"
        )
    return {rec.path: load_embedding(cache_dir, rec) for rec in records}
