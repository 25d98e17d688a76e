"""Multi-column averaging, confidence and rejection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import Network
from .preprocess import Preprocessor, parse_chain

REJECT = -1


class EmptyEnsembleError(ValueError):
    pass


@dataclass
class Column:
    net: Network
    preprocessor: Preprocessor
    seed: int = 0

    @property
    def descriptor(self):
        return self.net.descriptor

    @property
    def class_count(self) -> int:
        return self.net.class_count


def predict_column(col: Column, raw_image) -> np.ndarray:
    x = col.preprocessor(raw_image)
    if x.shape != col.descriptor.input_shape:
        raise ValueError(f"preprocessed shape {x.shape} does not match net input "
                         f"{col.descriptor.input_shape} (chain {col.preprocessor})")
    return col.net.predict(x)


def predict_column_all(col: Column, raw_images) -> np.ndarray:
    return np.stack([predict_column(col, im) for im in raw_images])


class Ensemble:
    """Columns whose class probabilities are averaged with equal weight.

    Summation always runs in column order, so results are reproducible
    bit for bit.
    """

    def __init__(self, columns):
        self.columns = list(columns)
        if not self.columns:
            raise EmptyEnsembleError("an ensemble needs at least one column")
        counts = {c.class_count for c in self.columns}
        if len(counts) != 1:
            raise ValueError(f"columns disagree on class count: {sorted(counts)}")
        self.class_count = counts.pop()

    def __len__(self):
        return len(self.columns)

    def column_predictions(self, raw_images) -> np.ndarray:
        """``(columns, n, classes)`` probabilities."""
        return np.stack([predict_column_all(c, raw_images) for c in self.columns])

    def predict_all(self, raw_images) -> np.ndarray:
        return average(self.column_predictions(raw_images))


def average(column_probs) -> np.ndarray:
    """Mean over the first axis, accumulated in index order."""
    column_probs = np.asarray(column_probs, dtype=np.float64)
    if len(column_probs) == 0:
        raise EmptyEnsembleError("nothing to average")
    acc = np.zeros(column_probs.shape[1:])
    for p in column_probs:
        acc += p
    return acc / len(column_probs)


def predict_ensemble(e: Ensemble, raw_image) -> np.ndarray:
    return average([predict_column(c, raw_image) for c in e.columns])


def classify(p) -> tuple[int, float]:
    p = np.asarray(p)
    k = int(np.argmax(p))
    return k, float(p[k])


def ranked(p) -> np.ndarray:
    """Class indices by decreasing probability; ties keep the smaller index first."""
    return np.argsort(-np.asarray(p), kind="stable")


def second_guess(p) -> int:
    return int(ranked(p)[1])


def classify_with_reject(p, threshold: float) -> int:
    """Argmax class, or :data:`REJECT` when the top probability is below ``threshold``."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    k, conf = classify(p)
    return REJECT if conf < threshold else k


def columns_from_chain(nets, chain: str, seeds=None):
    pre = parse_chain(chain)
    seeds = seeds or [0] * len(nets)
    return [Column(n, pre, s) for n, s in zip(nets, seeds)]
