"""Corpus discovery, label parsing, and stratified partitioning.

Each supported corpus encodes its labels in filenames or directory names;
scanning never opens the audio.  Files that fail to parse are collected
and reported, never silently dropped.  All shuffling is seeded and applied
after a lexicographic sort, so partitions are reproducible byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, TypeVar

import numpy as np

from .errors import ConfigError, EmptyDatasetError, StratifyError

log = logging.getLogger(__name__)

DATASETS = ("ravdess", "emodb", "savee", "aesdd", "shemo")

LABEL_SETS: dict[str, tuple[str, ...]] = {
    "ravdess": ("neutral", "calm", "happy", "sad", "angry", "fearful", "disgust", "surprised"),
    "emodb": ("anger", "boredom", "disgust", "fear", "happiness", "sadness", "neutral"),
    "savee": ("anger", "disgust", "fear", "happiness", "sadness", "surprise", "neutral"),
    "aesdd": ("anger", "disgust", "fear", "happiness", "sadness"),
    "shemo": ("anger", "happiness", "sadness", "surprise", "neutral"),
}

# (expected utterance count, relative slack).  Exact corpora get zero slack;
# mismatches are logged, not fatal, since local copies vary.
_EXPECTED_COUNTS = {
    "ravdess": (1440, 0.0),
    "savee": (480, 0.0),
    "emodb": (535, 0.10),
    "aesdd": (500, 0.25),
    "shemo": (3000, 0.10),
}

_RAVDESS_EMOTIONS = {
    "01": "neutral",
    "02": "calm",
    "03": "happy",
    "04": "sad",
    "05": "angry",
    "06": "fearful",
    "07": "disgust",
    "08": "surprised",
}
_EMODB_EMOTIONS = {
    "W": "anger",
    "L": "boredom",
    "E": "disgust",
    "A": "fear",
    "F": "happiness",
    "T": "sadness",
    "N": "neutral",
}
_SAVEE_PREFIXES = (  # longest match first
    ("sa", "sadness"),
    ("su", "surprise"),
    ("a", "anger"),
    ("d", "disgust"),
    ("f", "fear"),
    ("h", "happiness"),
    ("n", "neutral"),
)
_SHEMO_EMOTIONS = {"A": "anger", "H": "happiness", "N": "neutral", "S": "sadness", "W": "surprise"}


@dataclass(frozen=True)
class UtteranceRecord:
    path: str
    label: str
    speaker: str
    dataset: str


@dataclass(frozen=True)
class ScanResult:
    records: tuple[UtteranceRecord, ...]
    unparsable: tuple[tuple[str, str], ...]  # (path, reason)
    excluded: tuple[tuple[str, str], ...]  # intentional protocol exclusions


def _parse_ravdess(path: Path):
    parts = path.stem.split("-")
    if len(parts) != 7 or not all(len(p) == 2 and p.isdigit() for p in parts):
        return None, "expected 7 hyphenated two-digit fields"
    if parts[1] == "02":
        return "excluded", "song vocal channel (speech subset only)"
    emotion = _RAVDESS_EMOTIONS.get(parts[2])
    if emotion is None:
        return None, f"unknown emotion code {parts[2]!r}"
    return UtteranceRecord(str(path), emotion, f"actor{parts[6]}", "ravdess"), None


def _parse_emodb(path: Path):
    stem = path.stem
    if len(stem) < 6 or not stem[:2].isdigit():
        return None, "expected speaker digits then text/emotion code"
    emotion = _EMODB_EMOTIONS.get(stem[5])
    if emotion is None:
        return None, f"unknown emotion letter {stem[5]!r}"
    return UtteranceRecord(str(path), emotion, stem[:2], "emodb"), None


def _parse_savee(path: Path, root: Path):
    stem = path.stem
    parent = path.parent.name
    if parent and path.parent != root and re.fullmatch(r"[A-Za-z]{2}", parent):
        speaker, token = parent.upper(), stem
    elif "_" in stem:
        speaker, token = stem.split("_", 1)[0].upper(), stem.split("_", 1)[1]
    else:
        return None, "no speaker directory or prefix"
    for prefix, emotion in _SAVEE_PREFIXES:
        if token.startswith(prefix) and token[len(prefix) :].isdigit():
            return UtteranceRecord(str(path), emotion, speaker, "savee"), None
    return None, f"unrecognized emotion prefix in {token!r}"


def _parse_aesdd(path: Path, root: Path):
    label = path.parent.name.lower()
    if path.parent == root or label not in LABEL_SETS["aesdd"]:
        return None, f"not inside a known emotion directory (got {label!r})"
    m = re.search(r"\((\d+)\)", path.stem)
    speaker = f"speaker{m.group(1)}" if m else "unknown"
    return UtteranceRecord(str(path), label, speaker, "aesdd"), None


def _parse_shemo(path: Path):
    stem = path.stem
    if len(stem) < 4 or stem[0].upper() not in "FM" or not stem[1:3].isdigit():
        return None, "expected gender letter + 2-digit speaker"
    letter = stem[3].upper()
    if letter == "F":
        return "excluded", "fear class excluded by protocol"
    emotion = _SHEMO_EMOTIONS.get(letter)
    if emotion is None:
        return None, f"unknown emotion letter {letter!r}"
    return UtteranceRecord(str(path), emotion, stem[:3].upper(), "shemo"), None


def scan_dataset(root, kind: str) -> ScanResult:
    """Discover and label every .wav under root per the corpus convention."""
    if kind not in DATASETS:
        raise ConfigError(f"unknown dataset kind {kind!r} (choose from {', '.join(DATASETS)})")
    root = Path(root)
    if not root.is_dir():
        raise EmptyDatasetError(f"dataset root {root} does not exist")

    paths = sorted((p for p in root.rglob("*") if p.is_file() and p.suffix.lower() == ".wav"), key=str)
    records: list[UtteranceRecord] = []
    unparsable: list[tuple[str, str]] = []
    excluded: list[tuple[str, str]] = []
    for path in paths:
        if kind == "ravdess":
            parsed, reason = _parse_ravdess(path)
        elif kind == "emodb":
            parsed, reason = _parse_emodb(path)
        elif kind == "savee":
            parsed, reason = _parse_savee(path, root)
        elif kind == "aesdd":
            parsed, reason = _parse_aesdd(path, root)
        else:
            parsed, reason = _parse_shemo(path)
        if parsed == "excluded":
            excluded.append((str(path), reason))
        elif parsed is None:
            unparsable.append((str(path), reason))
        else:
            records.append(parsed)

    if not records:
        raise EmptyDatasetError(f"no labeled utterances found under {root} for {kind}")
    for path, reason in unparsable:
        log.warning("unparsable file %s: %s", path, reason)

    expected, slack = _EXPECTED_COUNTS[kind]
    scanned = len(records) + (len(excluded) if kind == "shemo" else 0)
    if abs(scanned - expected) > expected * slack:
        log.warning("%s: scanned %d utterances, published corpus has about %d", kind, scanned, expected)
    return ScanResult(tuple(records), tuple(unparsable), tuple(excluded))


R = TypeVar("R")


def _groups_by_label(items: Sequence[R]) -> dict[str, list[int]]:
    groups: dict[str, list[int]] = {}
    for i, item in enumerate(items):
        groups.setdefault(item.label, []).append(i)
    return dict(sorted(groups.items()))


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def stratified_split(items: Sequence[R], test_ratio: float, seed: int) -> tuple[list[R], list[R]]:
    """Seeded split preserving per-class proportions in the test set."""
    if not 0 < test_ratio < 1:
        raise StratifyError(f"test_ratio must be in (0, 1), got {test_ratio}")
    groups = _groups_by_label(items)
    for label, idx in groups.items():
        if len(idx) < 2:
            raise StratifyError(f"class {label!r} has {len(idx)} item(s); need at least 2")

    target = _round_half_up(len(items) * test_ratio)
    take = {label: _round_half_up(len(idx) * test_ratio) for label, idx in groups.items()}
    # Reconcile rounding drift by adjusting the largest classes first.
    order = sorted(groups, key=lambda lb: (-len(groups[lb]), lb))
    while sum(take.values()) < target:
        for label in order:
            if sum(take.values()) == target:
                break
            if take[label] < len(groups[label]):
                take[label] += 1
    while sum(take.values()) > target:
        for label in order:
            if sum(take.values()) == target:
                break
            if take[label] > 0:
                take[label] -= 1

    rng = np.random.default_rng(seed)
    test_idx: set[int] = set()
    for label, idx in groups.items():
        shuffled = rng.permutation(len(idx))
        test_idx.update(idx[j] for j in shuffled[: take[label]])
    train = [items[i] for i in range(len(items)) if i not in test_idx]
    test = [items[i] for i in range(len(items)) if i in test_idx]
    return train, test


def kfold(items: Sequence[R], k: int, seed: int) -> list[tuple[list[R], list[R]]]:
    """Class-stratified k-fold partition; folds are disjoint and exhaustive."""
    if k < 2:
        raise StratifyError(f"k must be at least 2, got {k}")
    groups = _groups_by_label(items)
    for label, idx in groups.items():
        if len(idx) < k:
            raise StratifyError(f"class {label!r} has {len(idx)} item(s); need at least k={k}")

    rng = np.random.default_rng(seed)
    fold_of = np.empty(len(items), dtype=np.int64)
    for _label, idx in groups.items():
        shuffled = rng.permutation(len(idx))
        for pos, j in enumerate(shuffled):
            fold_of[idx[j]] = pos % k
    folds = []
    for f in range(k):
        train = [items[i] for i in range(len(items)) if fold_of[i] != f]
        test = [items[i] for i in range(len(items)) if fold_of[i] == f]
        folds.append((train, test))
    return folds


def speaker_disjoint_split(items: Sequence[R], test_ratio: float, seed: int) -> tuple[list[R], list[R]]:
    """Holdout split assigning whole speakers to train or test."""
    if not 0 < test_ratio < 1:
        raise StratifyError(f"test_ratio must be in (0, 1), got {test_ratio}")
    speakers = sorted({item.speaker for item in items})
    if len(speakers) < 2:
        raise StratifyError("speaker-disjoint split needs at least 2 speakers")
    rng = np.random.default_rng(seed)
    shuffled = [speakers[j] for j in rng.permutation(len(speakers))]
    target = len(items) * test_ratio
    test_speakers: set[str] = set()
    count = 0
    for spk in shuffled:
        if count >= target or len(test_speakers) == len(speakers) - 1:
            break
        test_speakers.add(spk)
        count += sum(1 for item in items if item.speaker == spk)
    train = [item for item in items if item.speaker not in test_speakers]
    test = [item for item in items if item.speaker in test_speakers]
    return train, test


def speaker_kfold(items: Sequence[R], k: int, seed: int) -> list[tuple[list[R], list[R]]]:
    """k-fold partition with speaker-disjoint test folds."""
    if k < 2:
        raise StratifyError(f"k must be at least 2, got {k}")
    speakers = sorted({item.speaker for item in items})
    if len(speakers) < k:
        raise StratifyError(f"{len(speakers)} speaker(s) cannot fill k={k} folds")
    rng = np.random.default_rng(seed)
    shuffled = [speakers[j] for j in rng.permutation(len(speakers))]
    fold_of = {spk: i % k for i, spk in enumerate(shuffled)}
    folds = []
    for f in range(k):
        train = [item for item in items if fold_of[item.speaker] != f]
        test = [item for item in items if fold_of[item.speaker] == f]
        folds.append((train, test))
    return folds


def scan_config_hash(kind: str) -> str:
    payload = json.dumps({"dataset": kind, "labels": list(LABEL_SETS[kind])}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


# Some SER literature calls the surprise class "wonder"; reports name
# the corpora's own label and carry the alias for cross-referencing.
_LABEL_NOTES = {
    "savee": {"surprise": "a.k.a. wonder"},
    "ravdess": {"surprised": "a.k.a. wonder"},
}


def write_manifest(path, result: ScanResult, kind: str) -> None:
    """Line-delimited JSON: one header object, then one object per utterance."""
    header = {
        "type": "header",
        "dataset": kind,
        "labels": list(LABEL_SETS[kind]),
        "config_hash": scan_config_hash(kind),
        "unparsable": len(result.unparsable),
        "excluded": len(result.excluded),
    }
    if kind in _LABEL_NOTES:
        header["label_notes"] = _LABEL_NOTES[kind]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for rec in result.records:
            fh.write(
                json.dumps(
                    {"path": rec.path, "dataset": rec.dataset, "label": rec.label, "speaker": rec.speaker},
                    sort_keys=True,
                )
                + "\n"
            )


def read_manifest(path) -> tuple[dict, list[UtteranceRecord]]:
    with open(path, encoding="utf-8") as fh:
        lines = [line for line in fh.read().splitlines() if line.strip()]
    if not lines:
        raise ConfigError(f"{path}: empty manifest")
    header = json.loads(lines[0])
    if header.get("type") != "header" or "labels" not in header:
        raise ConfigError(f"{path}: first line is not a manifest header")
    labels = set(header["labels"])
    records = []
    for line in lines[1:]:
        raw = json.loads(line)
        if raw["label"] not in labels:
            raise ConfigError(f"{path}: record label {raw['label']!r} not in header label set")
        records.append(UtteranceRecord(raw["path"], raw["label"], raw["speaker"], raw["dataset"]))
    if not records:
        raise EmptyDatasetError(f"{path}: manifest contains no records")
    return header, records
