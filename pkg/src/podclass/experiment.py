"""The full comparison protocol: preprocessing arms, baselines, repeats.

One experiment takes a partitioned dataset and runs a set of arms: the
raw images, plus one arm per truncation rule in which every frame is
replaced by its projection onto its own class's subspace (built from the
train partition only). Each arm gets a deterministic nearest-subspace
baseline on the unprojected images and ``runs`` independent network
trainings whose seeds are base seed + run index; accuracies are
aggregated as mean and sample deviation per partition.

Reports carry no timestamps and serialize with sorted keys, so the same
inputs produce byte-identical reports.

A caveat rides in every report header: projecting an evaluation frame
uses its true class, so network scores on projected partitions lean on
label information. The subspace baseline never does.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import convnet
from .basis import BasisLibrary, build_library, project_pairs
from .dataset import DatasetSplit, Pair, partition_arrays
from .errors import ConfigError
from .metrics import Aggregate, accuracy, aggregate, confusion_matrix
from .subspace import classify_pairs

EVAL_PARTITIONS = ("validation", "test", "unseen")

LEAK_NOTE = (
    "projected evaluation partitions use each frame's true class for the "
    "projection; network accuracies on those partitions rely on label "
    "information, while the subspace baseline classifies unprojected frames"
)


@dataclass(frozen=True)
class TruncationRule:
    """How to pick per-class ranks: fixed rank, energy tolerance, or the
    hard-threshold rule when neither is given."""

    rank: int | None = None
    tolerance: float | None = None

    def __post_init__(self) -> None:
        if self.rank is not None and self.tolerance is not None:
            raise ConfigError("a truncation rule takes a rank or a tolerance, not both")

    @property
    def arm_name(self) -> str:
        if self.rank is not None:
            return f"projected-r{self.rank}"
        if self.tolerance is not None:
            return f"projected-tol{self.tolerance:g}"
        return "projected-auto"

    def describe(self) -> dict:
        if self.rank is not None:
            return {"kind": "fixed", "rank": self.rank}
        if self.tolerance is not None:
            return {"kind": "energy", "tolerance": self.tolerance}
        return {"kind": "hard-threshold"}


@dataclass(frozen=True)
class ExperimentConfig:
    rules: tuple[TruncationRule, ...] = (TruncationRule(),)
    runs: int = 5
    epochs: int = 80
    batch_size: int = 128
    learning_rate: float = 1e-3
    seed: int = 0
    channels: tuple[int, int, int] = (32, 64, 64)
    hidden: int = 128

    def __post_init__(self) -> None:
        if self.runs < 1:
            raise ConfigError("need at least one run")
        names = [rule.arm_name for rule in self.rules]
        if len(names) != len(set(names)):
            raise ConfigError(f"duplicate truncation arms: {names}")


def _partitions(split: DatasetSplit) -> dict[str, Sequence[Pair]]:
    return {name: split.partition(name) for name in ("train",) + EVAL_PARTITIONS}


def baseline_report(library: BasisLibrary, split: DatasetSplit) -> dict:
    """Nearest-subspace accuracy and confusion per evaluation partition."""
    out: dict = {}
    for name in EVAL_PARTITIONS:
        pairs = split.partition(name)
        if not pairs:
            continue
        true, predicted = classify_pairs(library, pairs)
        out[name] = {
            "accuracy": accuracy(true, predicted),
            "confusion": confusion_matrix(
                true, predicted, len(split.metadata.classes)
            ).tolist(),
        }
    return out


def _network_runs(
    arch_seedless: dict,
    data: dict[str, tuple[np.ndarray, np.ndarray]],
    config: ExperimentConfig,
) -> dict:
    runs = []
    per_partition: dict[str, list[float]] = {name: [] for name in EVAL_PARTITIONS}
    for i in range(config.runs):
        seed = config.seed + i
        arch = convnet.Architecture(seed=seed, **arch_seedless)
        train_cfg = convnet.TrainConfig(
            epochs=config.epochs,
            batch_size=config.batch_size,
            learning_rate=config.learning_rate,
            seed=seed,
        )
        result = convnet.train(
            arch, *data["train"], train_cfg, validation=data.get("validation")
        )
        row: dict = {"seed": seed, "final": result.history[-1]}
        for name in EVAL_PARTITIONS:
            if name not in data:
                continue
            images, labels = data[name]
            predicted = convnet.predict(result.params, images)
            acc = accuracy(labels, predicted)
            row[name] = acc
            per_partition[name].append(acc)
        runs.append(row)
    aggregates = {
        name: aggregate(values) for name, values in per_partition.items() if values
    }
    return {"runs": runs, "aggregate": aggregates}


def run_experiment(split: DatasetSplit, config: ExperimentConfig) -> dict:
    """Execute every arm and assemble the deterministic report."""
    if not split.train:
        raise ConfigError("experiment needs a nonempty train partition")
    h, w = split.metadata.frame_shape
    arch_seedless = {
        "height": h,
        "width": w,
        "channels": config.channels,
        "hidden": config.hidden,
        "classes": len(split.metadata.classes),
    }
    raw_parts = _partitions(split)

    arms: dict[str, dict] = {}
    order: list[str] = []

    # Raw arm: unprocessed images. Its baseline still needs subspaces, so
    # it borrows a hard-threshold library; the network sees raw pixels.
    raw_library = build_library(
        split.train, split.metadata.frame_shape, source="train partition"
    )
    raw_data = {
        name: partition_arrays(pairs) for name, pairs in raw_parts.items() if pairs
    }
    arms["raw"] = {
        "kind": "raw",
        "baseline_rank_rule": {"kind": "hard-threshold"},
        "baseline_ranks": {b.label.code: b.rank for b in raw_library.bases},
        "baseline": baseline_report(raw_library, split),
        "network": _network_runs(arch_seedless, raw_data, config),
    }
    order.append("raw")

    for rule in config.rules:
        library = build_library(
            split.train,
            split.metadata.frame_shape,
            rank=rule.rank,
            tolerance=rule.tolerance,
            source="train partition",
        )
        data = {
            name: partition_arrays(project_pairs(library, pairs))
            for name, pairs in raw_parts.items()
            if pairs
        }
        arms[rule.arm_name] = {
            "kind": "projected",
            "rank_rule": rule.describe(),
            "ranks": {b.label.code: b.rank for b in library.bases},
            "baseline": baseline_report(library, split),
            "network": _network_runs(arch_seedless, data, config),
        }
        order.append(rule.arm_name)

    report = {
        "protocol": {
            "arm_order": order,
            "runs": config.runs,
            "epochs": config.epochs,
            "batch_size": config.batch_size,
            "learning_rate": config.learning_rate,
            "seed": config.seed,
            "arch": {"channels": list(config.channels), "hidden": config.hidden},
            "classes": [label.code for label in split.metadata.classes],
            "split_counts": split.counts(),
            "notes": [LEAK_NOTE],
        },
        "arms": arms,
    }
    report["summary"] = summary_rows(report)
    return report


def summary_rows(report: dict) -> list[str]:
    """One tab-separated row per arm with mean and deviation per partition."""
    rows = []
    for name in report["protocol"]["arm_order"]:
        agg = report["arms"][name]["network"]["aggregate"]
        cells = [name]
        for partition, label in (
            ("validation", "validation"),
            ("test", "testing"),
            ("unseen", "unseen"),
        ):
            if partition in agg:
                cells.append(f"{label} {agg[partition]}")
        rows.append("\t".join(cells))
    return rows


def _jsonable(value):
    if isinstance(value, Aggregate):
        return {
            "mean": value.mean,
            "std": value.std,
            "count": value.count,
            "values": list(value.values),
        }
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


def render_report(report: dict) -> str:
    """Canonical JSON text of a report: sorted keys, no timestamps."""
    return json.dumps(_jsonable(report), sort_keys=True, indent=2) + "\n"


def save_report(report: dict, path: str | Path) -> None:
    Path(path).write_text(render_report(report), encoding="utf-8", newline="\n")
