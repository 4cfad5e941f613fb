"""Mini-batch SGD training loop and evaluation metrics."""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np

from ..tensor import Rng
from .network import Network, sgd_step

log = logging.getLogger(__name__)

# Rng streams derived from TrainConfig.seed
STREAM_INIT = 0
STREAM_SHUFFLE = 1
STREAM_DROPOUT = 2
STREAM_AUGMENT = 3


class NumericalError(ArithmeticError):
    def __init__(self, epoch: int, loss: float):
        super().__init__(f"non-finite training loss {loss} at epoch {epoch}")
        self.epoch = epoch
        self.loss = loss


@dataclass
class TrainConfig:
    epochs: int = 15
    batch_size: int = 32
    learning_rate: float = 0.01
    seed: int = 0
    split_ratio: float = 0.8

    def __post_init__(self):
        if int(self.epochs) != self.epochs or self.epochs < 0:
            raise ValueError(f"epochs must be a non-negative integer, got {self.epochs}")
        if int(self.batch_size) != self.batch_size or self.batch_size < 1:
            raise ValueError(f"batch_size must be a positive integer, got {self.batch_size}")
        if not 0 < self.learning_rate < float("inf"):
            raise ValueError(f"learning_rate must be positive and finite, got {self.learning_rate}")
        if not 0.0 < self.split_ratio < 1.0:
            raise ValueError(f"train fraction (split_ratio) must be in (0, 1), got {self.split_ratio}")
        self.epochs = int(self.epochs)
        self.batch_size = int(self.batch_size)


@dataclass
class EpochStats:
    epoch: int
    loss: float
    train_acc: float


@dataclass
class History:
    epochs: list[EpochStats] = field(default_factory=list)

    def __len__(self):
        return len(self.epochs)

    @property
    def losses(self):
        return [e.loss for e in self.epochs]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "loss", "train_acc"])
        for e in self.epochs:
            w.writerow([e.epoch, f"{e.loss:.6f}", f"{e.train_acc:.6f}"])
        return buf.getvalue()


def _as_arrays(dataset):
    if hasattr(dataset, "arrays"):
        return dataset.arrays()
    images, labels = dataset
    return np.asarray(images, dtype=np.float64), np.asarray(labels, dtype=np.int64)


def train(net: Network, train_set, config: TrainConfig, callback=None):
    """Train ``net`` in place; returns ``(net, history)``.

    One epoch is one pass over a freshly shuffled copy of the training set in
    mini-batches of ``config.batch_size`` (the last batch may be short).  The
    epoch loss is the sample-weighted mean batch loss; ``train_acc`` counts the
    training-mode predictions made along the way.  Everything random is drawn
    from streams of ``config.seed``, so reruns are bit-identical.
    """
    images, labels = _as_arrays(train_set)
    if len(images) == 0:
        raise ValueError("training set is empty")
    if images.shape[1:] != net.input_shape:
        raise ValueError(
            f"training images have shape {list(images.shape[1:])}, network expects {list(net.input_shape)}"
        )
    shuffle_rng = Rng(config.seed, STREAM_SHUFFLE)
    dropout_rng = Rng(config.seed, STREAM_DROPOUT)
    history = History()
    n = len(images)
    # overflow shows up as a non-finite loss, reported below as NumericalError
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(1, config.epochs + 1):
            order = shuffle_rng.permutation(n)
            total_loss = 0.0
            correct = 0
            for start in range(0, n, config.batch_size):
                idx = order[start : start + config.batch_size]
                logits = net.forward(images[idx], "training", dropout_rng)
                grads = net.backward(labels[idx])
                if not np.isfinite(net.last_loss):
                    raise NumericalError(epoch, net.last_loss)
                total_loss += net.last_loss * len(idx)
                correct += int(np.sum(np.argmax(logits, axis=1) == labels[idx]))
                sgd_step(net, grads, config.learning_rate)
            stats = EpochStats(epoch, total_loss / n, correct / n)
            history.epochs.append(stats)
            log.info("epoch %d loss %.6f train_acc %.4f", epoch, stats.loss, stats.train_acc)
            if callback is not None:
                callback(stats)
    return net, history


@dataclass
class Metrics:
    detection_rate: float
    confusion: np.ndarray
    precision: np.ndarray
    recall: np.ndarray

    @classmethod
    def from_predictions(cls, y_true, y_pred, n_classes: int) -> "Metrics":
        y_true = np.asarray(y_true, dtype=np.int64)
        y_pred = np.asarray(y_pred, dtype=np.int64)
        if y_true.size == 0:
            raise ValueError("cannot compute metrics on an empty set")
        confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
        np.add.at(confusion, (y_true, y_pred), 1)
        diag = np.diag(confusion).astype(float)
        col = confusion.sum(axis=0)
        row = confusion.sum(axis=1)
        precision = np.divide(diag, col, out=np.zeros(n_classes), where=col > 0)
        recall = np.divide(diag, row, out=np.zeros(n_classes), where=row > 0)
        rate = float(diag.sum() / confusion.sum())
        return cls(rate, confusion, precision, recall)

    def to_dict(self) -> dict:
        return {
            "detection_rate": self.detection_rate,
            "n_samples": int(self.confusion.sum()),
            "confusion": self.confusion.tolist(),
            "precision": [float(v) for v in self.precision],
            "recall": [float(v) for v in self.recall],
        }


def evaluate(net: Network, test_set) -> Metrics:
    """Inference-mode detection rate and confusion matrix (rows: true class)."""
    images, labels = _as_arrays(test_set)
    if len(images) == 0:
        raise ValueError("test set is empty")
    return Metrics.from_predictions(labels, net.predict(images), net.n_classes)
