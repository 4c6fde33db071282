"""Accuracy metrics, confusion matrices, and fold aggregation.

Conventions (recorded in every report because the literature is loose
with them): weighted accuracy is the overall fraction correct; unweighted
accuracy is the macro average of per-class recall; fold spread is the
sample standard deviation (n-1); percentages render to 2 decimals.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, LabelError, ShapeError

METRIC_CONVENTIONS = "WA=overall accuracy; UA=macro recall; std=sample (n-1) over folds"


def _check_pair(preds: Sequence, labels: Sequence) -> None:
    if len(preds) != len(labels):
        raise ShapeError(f"{len(preds)} predictions vs {len(labels)} labels")
    if len(labels) == 0:
        raise ShapeError("empty prediction/label sequences")


def weighted_accuracy(preds: Sequence, labels: Sequence) -> float:
    """Overall fraction of correct predictions."""
    _check_pair(preds, labels)
    return sum(p == t for p, t in zip(preds, labels)) / len(labels)


def unweighted_accuracy(preds: Sequence, labels: Sequence) -> float:
    """Macro average of per-class recall over classes present in labels."""
    _check_pair(preds, labels)
    by_class: dict = {}
    for p, t in zip(preds, labels):
        hit, total = by_class.get(t, (0, 0))
        by_class[t] = (hit + (p == t), total + 1)
    return sum(hit / total for hit, total in by_class.values()) / len(by_class)


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Row = true class, column = predicted; row_percent rows sum to 100."""

    labels: tuple[str, ...]
    counts: np.ndarray  # (C, C) int64
    row_percent: np.ndarray  # (C, C) float64

    def __eq__(self, other):
        if not isinstance(other, ConfusionMatrix):
            return NotImplemented
        return (
            self.labels == other.labels
            and np.array_equal(self.counts, other.counts)
            and np.array_equal(self.row_percent, other.row_percent)
        )

    @property
    def zero_rows(self) -> tuple[str, ...]:
        """True classes with no instances (their percent rows are all zero)."""
        return tuple(lb for lb, total in zip(self.labels, self.counts.sum(axis=1)) if total == 0)

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "counts": self.counts.tolist(),
            "row_percent": self.row_percent.tolist(),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ConfusionMatrix":
        return cls(
            labels=tuple(raw["labels"]),
            counts=np.asarray(raw["counts"], dtype=np.int64),
            row_percent=np.asarray(raw["row_percent"], dtype=np.float64),
        )

    def render(self) -> str:
        width = max(9, max(len(lb) for lb in self.labels) + 1)
        lines = [" " * width + "".join(f"{lb:>{width}}" for lb in self.labels)]
        for i, lb in enumerate(self.labels):
            row = "".join(f"{self.row_percent[i, j]:>{width}.2f}" for j in range(len(self.labels)))
            lines.append(f"{lb:<{width}}" + row)
        return "\n".join(lines)


def confusion(preds: Sequence[str], labels: Sequence[str], label_order: Sequence[str]) -> ConfusionMatrix:
    """Count matrix plus row-percent view in the given class order."""
    _check_pair(preds, labels)
    index = {lb: i for i, lb in enumerate(label_order)}
    if len(index) != len(label_order):
        raise LabelError("duplicate labels in label_order")
    c = len(label_order)
    counts = np.zeros((c, c), dtype=np.int64)
    for p, t in zip(preds, labels):
        if t not in index or p not in index:
            raise LabelError(f"label {t if t not in index else p!r} not in label order")
        counts[index[t], index[p]] += 1
    sums = counts.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        row_percent = np.where(sums > 0, 100.0 * counts / np.maximum(sums, 1), 0.0)
    return ConfusionMatrix(labels=tuple(label_order), counts=counts, row_percent=row_percent)


def wa_from_confusion(cm: ConfusionMatrix) -> float:
    return float(np.trace(cm.counts) / cm.counts.sum())


def ua_from_confusion(cm: ConfusionMatrix) -> float:
    present = cm.counts.sum(axis=1) > 0
    return float(np.diag(cm.row_percent)[present].mean() / 100.0)


@dataclass(frozen=True)
class FoldResult:
    wa: float
    ua: float
    matrix: ConfusionMatrix

    def to_dict(self) -> dict:
        return {"wa": self.wa, "ua": self.ua, "matrix": self.matrix.to_dict()}

    @classmethod
    def from_dict(cls, raw: dict) -> "FoldResult":
        return cls(wa=raw["wa"], ua=raw["ua"], matrix=ConfusionMatrix.from_dict(raw["matrix"]))


@dataclass(frozen=True)
class EvalReport:
    """Per-fold metrics plus mean +/- std and run provenance."""

    dataset: str
    checkpoint_id: str
    split_mode: str
    seed: int
    config_hash: str
    folds: tuple[FoldResult, ...]
    wa_mean: float
    wa_std: float | None
    ua_mean: float
    ua_std: float | None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "checkpoint_id": self.checkpoint_id,
            "split_mode": self.split_mode,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "conventions": METRIC_CONVENTIONS,
            "folds": [f.to_dict() for f in self.folds],
            "wa_mean": self.wa_mean,
            "wa_std": self.wa_std,
            "ua_mean": self.ua_mean,
            "ua_std": self.ua_std,
            "extra": self.extra,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        raw = json.loads(text)
        return cls(
            dataset=raw["dataset"],
            checkpoint_id=raw["checkpoint_id"],
            split_mode=raw["split_mode"],
            seed=raw["seed"],
            config_hash=raw["config_hash"],
            folds=tuple(FoldResult.from_dict(f) for f in raw["folds"]),
            wa_mean=raw["wa_mean"],
            wa_std=raw["wa_std"],
            ua_mean=raw["ua_mean"],
            ua_std=raw["ua_std"],
            extra=raw.get("extra", {}),
        )

    def summary_line(self) -> str:
        wa = f"{100 * self.wa_mean:.2f}" + (f" ± {100 * self.wa_std:.2f}" if self.wa_std is not None else "")
        ua = f"{100 * self.ua_mean:.2f}" + (f" ± {100 * self.ua_std:.2f}" if self.ua_std is not None else "")
        return f"{self.dataset} [{self.split_mode}, {len(self.folds)} fold(s)]  WA {wa}  UA {ua}"

    def render(self) -> str:
        lines = [
            self.summary_line(),
            f"checkpoint {self.checkpoint_id}  seed {self.seed}  config {self.config_hash}",
            METRIC_CONVENTIONS,
            "",
        ]
        for i, fold in enumerate(self.folds):
            lines.append(f"fold {i}: WA {100 * fold.wa:.2f}  UA {100 * fold.ua:.2f}")
            lines.append(fold.matrix.render())
            lines.append("")
        return "\n".join(lines)


def aggregate(
    folds: Sequence[FoldResult],
    dataset: str = "",
    checkpoint_id: str = "",
    split_mode: str = "",
    seed: int = 0,
    config_hash: str = "",
    extra: dict | None = None,
) -> EvalReport:
    """Mean and sample std of WA/UA over folds; std omitted for one fold."""
    if not folds:
        raise ConfigError("aggregate needs at least one fold")
    label_sets = {fold.matrix.labels for fold in folds}
    if len(label_sets) != 1:
        raise ConfigError(f"folds carry different label sets: {label_sets}")
    was = np.array([f.wa for f in folds], dtype=np.float64)
    uas = np.array([f.ua for f in folds], dtype=np.float64)
    many = len(folds) >= 2
    return EvalReport(
        dataset=dataset,
        checkpoint_id=checkpoint_id,
        split_mode=split_mode,
        seed=seed,
        config_hash=config_hash,
        folds=tuple(folds),
        wa_mean=float(was.mean()),
        wa_std=float(was.std(ddof=1)) if many else None,
        ua_mean=float(uas.mean()),
        ua_std=float(uas.std(ddof=1)) if many else None,
        extra=dict(extra or {}),
    )
