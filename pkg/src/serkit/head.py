"""Trainable classification head over pooled encoder features.

The only trainable state in the whole pipeline: two feed-forward layers
(ReLU between, softmax on top) trained with mini-batch Adam on
cross-entropy.  Gradients are exact analytic derivatives; training is
bitwise deterministic for a fixed seed.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import ops
from .archive import read_archive, write_archive
from .audio import AudioClip
from .encoder import EncoderModel, extract
from .errors import ArchiveError, DataError, LabelError, ShapeError

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 32
    max_epochs: int = 100
    early_stop_patience: int = 10
    seed: int = 0
    weight_decay: float = 1e-5
    hidden_size: int = 256

    def __post_init__(self):
        if (
            self.learning_rate <= 0
            or self.batch_size <= 0
            or self.max_epochs < 0
            or self.early_stop_patience <= 0
            or self.weight_decay < 0
            or self.hidden_size <= 0
        ):
            raise ValueError(f"non-positive training hyperparameter in {self}")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "max_epochs": self.max_epochs,
            "early_stop_patience": self.early_stop_patience,
            "seed": self.seed,
            "weight_decay": self.weight_decay,
            "hidden_size": self.hidden_size,
        }


@dataclass
class ClassifierHead:
    w1: np.ndarray  # (hidden, dim)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (classes, hidden)
    b2: np.ndarray  # (classes,)
    label_names: tuple[str, ...]

    def __post_init__(self):
        for name in ("w1", "b1", "w2", "b2"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float32))
        self.label_names = tuple(str(n) for n in self.label_names)
        h, d = self.w1.shape
        c = len(self.label_names)
        if c < 2:
            raise ShapeError("a classifier needs at least 2 classes")
        if self.b1.shape != (h,) or self.w2.shape != (c, h) or self.b2.shape != (c,):
            raise ShapeError(
                f"inconsistent head shapes: w1{self.w1.shape} b1{self.b1.shape} w2{self.w2.shape} b2{self.b2.shape}"
            )
        for name in ("w1", "b1", "w2", "b2"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ShapeError(f"non-finite values in head parameter {name}")

    @property
    def input_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden_size(self) -> int:
        return self.w1.shape[0]

    @property
    def num_classes(self) -> int:
        return len(self.label_names)


def mean_pool(features: np.ndarray) -> np.ndarray:
    """Arithmetic mean over time of an (n, d) feature matrix -> (d,)."""
    features = np.asarray(features, dtype=np.float32)
    if features.ndim != 2 or features.shape[0] < 1:
        raise ShapeError(f"mean_pool expects a non-empty (n, d) matrix, got {features.shape}")
    return features.mean(axis=0, dtype=np.float64).astype(np.float32)


def init_head(input_dim: int, label_names: Sequence[str], hidden_size: int, seed: int) -> ClassifierHead:
    """Seeded uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) initialization."""
    rng = np.random.default_rng(seed)
    bound1 = 1.0 / np.sqrt(input_dim)
    bound2 = 1.0 / np.sqrt(hidden_size)
    return ClassifierHead(
        w1=rng.uniform(-bound1, bound1, size=(hidden_size, input_dim)).astype(np.float32),
        b1=rng.uniform(-bound1, bound1, size=hidden_size).astype(np.float32),
        w2=rng.uniform(-bound2, bound2, size=(len(label_names), hidden_size)).astype(np.float32),
        b2=rng.uniform(-bound2, bound2, size=len(label_names)).astype(np.float32),
        label_names=tuple(label_names),
    )


def _logits(head: ClassifierHead, e: np.ndarray) -> np.ndarray:
    """Batch logits for embeddings e (n, d)."""
    hidden = ops.relu(e @ head.w1.T + head.b1)
    return hidden @ head.w2.T + head.b2


def forward(head: ClassifierHead, e: np.ndarray) -> np.ndarray:
    """Class probability vector for one embedding (d,)."""
    e = np.asarray(e, dtype=np.float32)
    if e.shape != (head.input_dim,):
        raise ShapeError(f"embedding shaped {e.shape}, head expects ({head.input_dim},)")
    return ops.softmax(_logits(head, e[None, :]))[0]


def _as_batch(head: ClassifierHead, batch) -> tuple[np.ndarray, np.ndarray]:
    if len(batch) == 0:
        raise ShapeError("empty batch")
    vecs, labels = zip(*batch)
    e = np.stack([np.asarray(v, dtype=np.float32) for v in vecs])
    y = np.asarray(labels, dtype=np.int64)
    if e.shape[1] != head.input_dim:
        raise ShapeError(f"embeddings of dim {e.shape[1]}, head expects {head.input_dim}")
    if y.min() < 0 or y.max() >= head.num_classes:
        raise LabelError(f"label outside [0, {head.num_classes})")
    return e, y


def loss_and_grads(head: ClassifierHead, batch) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy over (embedding, class index) pairs + exact grads."""
    e, y = _as_batch(head, batch)
    n = e.shape[0]
    z1 = e @ head.w1.T + head.b1
    a1 = ops.relu(z1)
    probs = ops.softmax(a1 @ head.w2.T + head.b2)
    loss = float(-np.log(np.maximum(probs[np.arange(n), y], 1e-30)).mean())

    dlogits = probs.copy()
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n
    da1 = dlogits @ head.w2
    dz1 = da1 * (z1 > 0)
    grads = {
        "w2": dlogits.T @ a1,
        "b2": dlogits.sum(axis=0),
        "w1": dz1.T @ e,
        "b1": dz1.sum(axis=0),
    }
    return loss, {k: v.astype(np.float32) for k, v in grads.items()}


def _unweighted_accuracy(preds: np.ndarray, labels: np.ndarray) -> float:
    recalls = [(preds[labels == c] == c).mean() for c in np.unique(labels)]
    return float(np.mean(recalls))


def train_head(
    train: Sequence[tuple[np.ndarray, int]],
    label_names: Sequence[str],
    config: TrainConfig,
    validation: Sequence[tuple[np.ndarray, int]] | None = None,
) -> ClassifierHead:
    """Mini-batch Adam on cross-entropy; returns the best-validation-UA
    checkpoint, or the final head when no validation set is given."""
    if not train:
        raise DataError("empty training set")
    dim = np.asarray(train[0][0]).shape[0]
    head = init_head(dim, label_names, config.hidden_size, config.seed)
    present = {int(y) for _v, y in train}
    missing = set(range(head.num_classes)) - present
    if missing:
        raise DataError(f"classes absent from training data: {sorted(missing)}")
    if config.max_epochs == 0:
        return head

    e_all, y_all = _as_batch(head, list(train))
    if validation:
        e_val, y_val = _as_batch(head, list(validation))

    rng = np.random.default_rng(config.seed)
    params = {"w1": head.w1, "b1": head.b1, "w2": head.w2, "b2": head.b2}
    m_state = {k: np.zeros_like(v) for k, v in params.items()}
    v_state = {k: np.zeros_like(v) for k, v in params.items()}
    step = 0
    best: tuple[float, float, ClassifierHead] | None = None  # (ua, epoch loss, snapshot)
    stale = 0

    for _epoch in range(config.max_epochs):
        order = rng.permutation(e_all.shape[0])
        epoch_loss = 0.0
        for lo in range(0, order.size, config.batch_size):
            idx = order[lo : lo + config.batch_size]
            loss, grads = loss_and_grads(head, list(zip(e_all[idx], y_all[idx])))
            epoch_loss += loss * idx.size
            if config.weight_decay:
                grads["w1"] = grads["w1"] + np.float32(config.weight_decay) * params["w1"]
                grads["w2"] = grads["w2"] + np.float32(config.weight_decay) * params["w2"]
            step += 1
            c1 = np.float32(1.0 - ADAM_BETA1**step)
            c2 = np.float32(1.0 - ADAM_BETA2**step)
            for k, g in grads.items():
                m_state[k] = ADAM_BETA1 * m_state[k] + np.float32(1 - ADAM_BETA1) * g
                v_state[k] = ADAM_BETA2 * v_state[k] + np.float32(1 - ADAM_BETA2) * g * g
                params[k] -= np.float32(config.learning_rate) * (m_state[k] / c1) / (
                    np.sqrt(v_state[k] / c2) + np.float32(ADAM_EPS)
                )
        epoch_loss /= order.size

        if validation:
            preds = _logits(head, e_val).argmax(axis=1)
            ua = _unweighted_accuracy(preds, y_val)
            # Ties on validation UA (common with tiny validation sets)
            # resolve toward the lower-training-loss snapshot.
            if best is None or ua > best[0] or (ua == best[0] and epoch_loss < best[1]):
                improved = best is None or ua > best[0]
                best = (ua, epoch_loss, copy.deepcopy(head))
                stale = 0 if improved else stale + 1
            else:
                stale += 1
            if stale >= config.early_stop_patience:
                break

    return best[2] if best is not None else head


def predict(model: EncoderModel, head: ClassifierHead, clip: AudioClip) -> tuple[str, np.ndarray]:
    """Classify one clip; ties resolve to the lowest class index."""
    if head.input_dim != model.manifest.hidden_dim:
        raise ShapeError(f"head expects dim {head.input_dim}, encoder produces {model.manifest.hidden_dim}")
    probs = forward(head, mean_pool(extract(clip, model)))
    return head.label_names[int(np.argmax(probs))], probs


def save_head(path, head: ClassifierHead, config_hash: str | None = None) -> None:
    manifest = {
        "kind": "classifier_head",
        "label_names": list(head.label_names),
        "input_dim": head.input_dim,
        "hidden_size": head.hidden_size,
        "num_classes": head.num_classes,
    }
    if config_hash:
        manifest["config_hash"] = config_hash
    write_archive(path, manifest, {"head.w1": head.w1, "head.b1": head.b1, "head.w2": head.w2, "head.b2": head.b2})


def load_head(path) -> ClassifierHead:
    manifest, tensors = read_archive(path)
    if manifest.get("kind") != "classifier_head":
        raise ArchiveError(f"{path}: archive holds {manifest.get('kind')!r}, not a classifier head")
    try:
        return ClassifierHead(
            w1=tensors["head.w1"],
            b1=tensors["head.b1"],
            w2=tensors["head.w2"],
            b2=tensors["head.b2"],
            label_names=tuple(manifest["label_names"]),
        )
    except KeyError as exc:
        raise ArchiveError(f"{path}: missing head tensor or field {exc}") from exc
