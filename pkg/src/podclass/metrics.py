"""Classification metrics and run-to-run aggregation.

Aggregates over repeated runs report mean and sample standard deviation
(n - 1 denominator, zero for a single run). The accumulation happens on a
sorted copy of the values, so the reported numbers are bit-identical no
matter what order the runs finished in.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import Origin
from .errors import ConfigError


def accuracy(true: np.ndarray, predicted: np.ndarray) -> float:
    true = np.asarray(true)
    predicted = np.asarray(predicted)
    if true.shape != predicted.shape or true.size == 0:
        raise ConfigError("need two equal-length nonempty label arrays")
    return float((true == predicted).mean())


def confusion_matrix(
    true: np.ndarray, predicted: np.ndarray, class_count: int
) -> np.ndarray:
    """Counts with rows indexed by true class, columns by predicted class."""
    true = np.asarray(true)
    predicted = np.asarray(predicted)
    if true.shape != predicted.shape:
        raise ConfigError("label arrays differ in length")
    if class_count < 1:
        raise ConfigError("class_count must be positive")
    for name, arr in (("true", true), ("predicted", predicted)):
        if arr.size and (arr.min() < 0 or arr.max() >= class_count):
            raise ConfigError(f"{name} labels outside [0, {class_count})")
    matrix = np.zeros((class_count, class_count), dtype=np.int64)
    np.add.at(matrix, (true, predicted), 1)
    return matrix


@dataclass(frozen=True)
class Aggregate:
    """Mean and sample standard deviation of one metric across runs."""

    mean: float
    std: float
    count: int
    values: tuple[float, ...]

    def __str__(self) -> str:
        return f"{self.mean:.3g}±{self.std:.3g}"


def aggregate(values: Sequence[float]) -> Aggregate:
    """Order-independent mean and n-1 standard deviation."""
    if len(values) == 0:
        raise ConfigError("cannot aggregate zero values")
    ordered = np.sort(np.asarray(values, dtype=np.float64))
    mean = float(ordered.mean())
    std = float(ordered.std(ddof=1)) if ordered.size > 1 else 0.0
    return Aggregate(mean=mean, std=std, count=int(ordered.size), values=tuple(ordered))


def majority_vote_by_sample(
    true: np.ndarray,
    predicted: np.ndarray,
    origins: Sequence[Origin],
) -> dict:
    """Recording-level vote over frame predictions; a supplementary view.

    Frames are grouped by (true class, sample id); each group's prediction
    is the most frequent frame prediction, ties going to the lowest class
    id. The frame-level metrics above remain the primary protocol; this
    exists because frames of one recording are not independent.
    """
    true = np.asarray(true)
    predicted = np.asarray(predicted)
    if len(origins) != true.size or true.size != predicted.size:
        raise ConfigError("origins must align one-to-one with label arrays")
    groups: dict[tuple[int, str], list[int]] = {}
    for i, (sample_id, _) in enumerate(origins):
        groups.setdefault((int(true[i]), sample_id), []).append(i)
    sample_true = []
    sample_pred = []
    for (true_id, _), indices in sorted(groups.items()):
        votes = np.bincount(predicted[indices])
        sample_true.append(true_id)
        sample_pred.append(int(votes.argmax()))
    sample_true_arr = np.array(sample_true)
    sample_pred_arr = np.array(sample_pred)
    return {
        "kind": "per-recording majority vote (supplementary)",
        "samples": len(sample_true),
        "true": sample_true_arr,
        "predicted": sample_pred_arr,
        "accuracy": accuracy(sample_true_arr, sample_pred_arr),
    }
