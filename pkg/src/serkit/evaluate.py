"""End-to-end evaluation over cached embeddings.

Builds the requested split (holdout, k-fold, or repeated holdout), trains
one head per fold, scores it, and aggregates.  A validation slice is
carved out of each fold's training data for early stopping whenever the
class sizes allow it; the test fold never influences training.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .datasets import UtteranceRecord, kfold, speaker_disjoint_split, speaker_kfold, stratified_split
from .errors import ConfigError, DataError, StratifyError
from .head import ClassifierHead, TrainConfig, _logits, train_head
from .metrics import (
    EvalReport,
    FoldResult,
    aggregate,
    confusion,
    unweighted_accuracy,
    ua_from_confusion,
    wa_from_confusion,
    weighted_accuracy,
)

SPLIT_MODES = ("holdout", "kfold", "repeated")
_VALIDATION_FRACTION = 0.1


def build_folds(
    records: Sequence[UtteranceRecord],
    mode: str,
    *,
    folds: int = 5,
    test_ratio: float = 0.2,
    repeats: int = 5,
    seed: int = 0,
    speaker_disjoint: bool = False,
) -> list[tuple[list[UtteranceRecord], list[UtteranceRecord]]]:
    if mode == "holdout":
        split = speaker_disjoint_split if speaker_disjoint else stratified_split
        return [split(records, test_ratio, seed)]
    if mode == "kfold":
        return (speaker_kfold if speaker_disjoint else kfold)(records, folds, seed)
    if mode == "repeated":
        split = speaker_disjoint_split if speaker_disjoint else stratified_split
        return [split(records, test_ratio, seed + i) for i in range(repeats)]
    raise ConfigError(f"unknown split mode {mode!r} (choose from {', '.join(SPLIT_MODES)})")


def _carve_validation(train: list[UtteranceRecord], labels: Sequence[str], seed: int):
    """Stratified validation slice for early stopping, when sizes permit."""
    try:
        fit, val = stratified_split(train, _VALIDATION_FRACTION, seed)
    except StratifyError:
        return train, None
    if not val or {r.label for r in fit} != set(labels) & {r.label for r in train}:
        return train, None
    return fit, val


def _pairs(records: Sequence[UtteranceRecord], embeddings: Mapping[str, np.ndarray], index: Mapping[str, int]):
    return [(embeddings[r.path], index[r.label]) for r in records]


@dataclass(frozen=True)
class EvaluationResult:
    report: EvalReport
    heads: tuple[ClassifierHead, ...]


def run_evaluation(
    records: Sequence[UtteranceRecord],
    embeddings: Mapping[str, np.ndarray],
    label_names: Sequence[str],
    *,
    mode: str = "kfold",
    folds: int = 5,
    test_ratio: float = 0.2,
    repeats: int = 5,
    seed: int = 0,
    train_config: TrainConfig | None = None,
    speaker_disjoint: bool = False,
    dataset: str = "",
    checkpoint_id: str = "",
    config_hash: str = "",
) -> EvaluationResult:
    """Train and score one head per fold; returns the aggregate report."""
    missing = [r.path for r in records if r.path not in embeddings]
    if missing:
        raise ConfigError(f"{len(missing)} record(s) lack embeddings, e.g. {missing[0]}")
    index = {lb: i for i, lb in enumerate(label_names)}
    for r in records:
        if r.label not in index:
            raise ConfigError(f"record label {r.label!r} not in label set {list(label_names)}")

    cfg = train_config or TrainConfig(seed=seed)
    pairs = build_folds(
        records, mode, folds=folds, test_ratio=test_ratio, repeats=repeats, seed=seed,
        speaker_disjoint=speaker_disjoint,
    )

    fold_results: list[FoldResult] = []
    heads: list[ClassifierHead] = []
    for fold_idx, (train, test) in enumerate(pairs):
        if not test:
            raise DataError(f"fold {fold_idx} has an empty test set")
        fit, val = _carve_validation(list(train), label_names, seed)
        head = train_head(
            _pairs(fit, embeddings, index),
            label_names,
            cfg,
            validation=_pairs(val, embeddings, index) if val else None,
        )
        heads.append(head)

        e_test = np.stack([embeddings[r.path] for r in test])
        pred_idx = _logits(head, e_test).argmax(axis=1)
        preds = [label_names[i] for i in pred_idx]
        truth = [r.label for r in test]
        wa = weighted_accuracy(preds, truth)
        ua = unweighted_accuracy(preds, truth)
        cm = confusion(preds, truth, label_names)
        # Cross-check the two metric routes against the matrix.
        if abs(wa - wa_from_confusion(cm)) > 1e-9 or abs(ua - ua_from_confusion(cm)) > 1e-9:
            raise AssertionError("metric cross-check failed against confusion matrix")
        fold_results.append(FoldResult(wa=wa, ua=ua, matrix=cm))

    report = aggregate(
        fold_results,
        dataset=dataset,
        checkpoint_id=checkpoint_id,
        split_mode=mode + ("+speaker_disjoint" if speaker_disjoint else ""),
        seed=seed,
        config_hash=config_hash,
        extra={"train_config": cfg.to_dict(), "n_records": len(records)},
    )
    return EvaluationResult(report=report, heads=tuple(heads))
