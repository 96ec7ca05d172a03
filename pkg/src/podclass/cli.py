"""Command-line front end.

Subcommands cover the full workflow: synthesize a dataset, sanity-check
an ingested tree, build and inspect per-class bases, project a dataset
through them, train the network, score the subspace baseline, and run
the complete multi-arm experiment.

Exit codes: 0 success, 2 bad configuration or arguments, 3 unreadable or
malformed data, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import convnet
from .basis import (
    build_class_basis,
    build_library,
    load_library,
    save_factors,
    save_library,
)
from .dataset import (
    DatasetSplit,
    Sample,
    SplitPolicy,
    SyntheticSpec,
    generate_synthetic,
    group_by_class,
    load_dataset,
    partition_arrays,
    split_dataset,
    split_from_manifest,
    write_manifest,
    write_samples,
)
from .errors import ConfigError, DataError, NumericError
from .experiment import (
    ExperimentConfig,
    TruncationRule,
    baseline_report,
    render_report,
    run_experiment,
    save_report,
)
from .pgm import from_unit, write_pgm

MANIFEST_NAME = "manifest.tsv"


def _parse_arch(text: str) -> tuple[tuple[int, int, int], int]:
    parts = text.split(",")
    if len(parts) != 4:
        raise ConfigError(f"--arch wants c1,c2,c3,hidden, got {text!r}")
    try:
        c1, c2, c3, hidden = (int(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"--arch wants four integers, got {text!r}") from exc
    return (c1, c2, c3), hidden


def _rules(args) -> tuple[TruncationRule, ...]:
    rules = [TruncationRule(rank=r) for r in args.rank or []]
    rules += [TruncationRule(tolerance=t) for t in args.tolerance or []]
    if getattr(args, "gavish", False) or not rules:
        rules.append(TruncationRule())
    return tuple(rules)


def _single_rule(args) -> TruncationRule:
    rules = _rules(args)
    if len(rules) > 1:
        raise ConfigError("this subcommand takes a single truncation rule")
    return rules[0]


def _load_split(args) -> tuple[list[Sample], DatasetSplit]:
    samples = load_dataset(args.data)
    manifest = Path(args.manifest) if args.manifest else Path(args.data) / MANIFEST_NAME
    view = Path(args.data).name
    if manifest.is_file():
        split = split_from_manifest(samples, manifest, view=view)
    else:
        policy = SplitPolicy.for_samples(samples)
        split = split_dataset(samples, policy, seed=args.seed, view=view)
    return samples, split


def _add_data_options(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--data", required=True, help="dataset root directory")
    sub.add_argument(
        "--manifest",
        help=f"split manifest path (default: <data>/{MANIFEST_NAME} when present)",
    )
    sub.add_argument("--seed", type=int, default=0, help="seed (default 0)")


def _add_rule_options(sub: argparse.ArgumentParser, repeatable: bool) -> None:
    sub.add_argument(
        "--rank",
        type=int,
        action="append",
        help="fixed truncation rank" + (" (repeatable)" if repeatable else ""),
    )
    sub.add_argument(
        "--tolerance",
        type=float,
        action="append",
        help="relative energy tolerance" + (" (repeatable)" if repeatable else ""),
    )
    sub.add_argument(
        "--gavish",
        action="store_true",
        help="hard-threshold rank selection (default when no rule is given)",
    )


def _add_train_options(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--epochs", type=int, default=80)
    sub.add_argument("--batch", type=int, default=128)
    sub.add_argument("--lr", type=float, default=1e-3)
    sub.add_argument(
        "--arch",
        default="32,64,64,128",
        help="channels and hidden width as c1,c2,c3,hidden",
    )


def cmd_synth(args) -> int:
    spec = (
        SyntheticSpec.from_config_file(args.spec) if args.spec else SyntheticSpec()
    )
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    samples = generate_synthetic(spec)
    out = Path(args.out)
    write_samples(samples, out)
    policy = SplitPolicy.for_samples(samples)
    split = split_dataset(samples, policy, seed=spec.seed, view=out.name)
    write_manifest(split, out / MANIFEST_NAME)
    (out / "spec.txt").write_text(spec.to_config_text(), encoding="utf-8")
    counts = split.counts()
    print(f"wrote {len(samples)} samples under {out}")
    print(
        "split frames: "
        + " ".join(f"{name}={counts[name]}" for name in sorted(counts))
    )
    return 0


def cmd_ingest_check(args) -> int:
    samples, split = _load_split(args)
    by_class = group_by_class(samples)
    shape = samples[0].frame_shape
    print(f"classes: {len(by_class)}")
    for label, group in by_class.items():
        frames = sum(len(s.frames) for s in group)
        print(f"  {label.code}: {len(group)} samples, {frames} frames")
    print(f"frame shape: {shape[0]}x{shape[1]}")
    counts = split.counts()
    print(
        "split frames: "
        + " ".join(f"{name}={counts[name]}" for name in sorted(counts))
    )
    for name in ("train", "validation", "test", "unseen"):
        for image, _ in split.partition(name):
            if not np.isfinite(image).all():
                raise DataError(f"non-finite pixels in {name} partition")
    print("ok")
    return 0


def cmd_build_basis(args) -> int:
    rule = _single_rule(args)
    _, split = _load_split(args)
    library = build_library(
        split.train,
        split.metadata.frame_shape,
        rank=rule.rank,
        tolerance=rule.tolerance,
        source=f"train partition of {Path(args.data).name}",
    )
    save_library(library, args.out)
    for basis in library.bases:
        print(f"{basis.label.code}: rank {basis.rank}")
    for note in library.provenance["warnings"]:
        print(f"warning: {note}", file=sys.stderr)
    print(f"wrote {args.out}")
    return 0


def cmd_spectrum(args) -> int:
    _, split = _load_split(args)
    grouped: dict[int, list] = {}
    labels = {}
    for image, label in split.train:
        grouped.setdefault(label.id, []).append(image)
        labels[label.id] = label
    out_dir = Path(args.out) if args.out else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    for class_id in sorted(grouped):
        label = labels[class_id]
        basis, svd, notes = build_class_basis(grouped[class_id], label)
        for note in notes:
            print(f"warning: {note}", file=sys.stderr)
        if svd is None:
            print(f"{label.code}: degenerate ensemble, canonical basis")
            continue
        lead = " ".join(f"{v:.4g}" for v in svd.values[:6])
        print(
            f"{label.code}: frames={len(grouped[class_id])} rank={svd.rank} "
            f"kept={basis.rank} leading sigma: {lead}"
        )
        if out_dir is not None:
            save_factors(svd, out_dir / f"{label.code}.factors")
    if out_dir is not None:
        print(f"wrote factors under {out_dir}")
    return 0


def cmd_project(args) -> int:
    rule = _single_rule(args)
    samples, split = _load_split(args)
    library = build_library(
        split.train,
        split.metadata.frame_shape,
        rank=rule.rank,
        tolerance=rule.tolerance,
        source=f"train partition of {Path(args.data).name}",
    )
    out = Path(args.out)
    h, w = library.frame_shape
    for sample in samples:
        basis = library.basis_for(sample.label.id)
        sample_dir = out / sample.label.code / sample.sample_id
        sample_dir.mkdir(parents=True, exist_ok=True)
        for k, frame in enumerate(sample.frames):
            projected = basis.project(frame.reshape(-1)).reshape(h, w)
            write_pgm(sample_dir / f"{k:04d}.pgm", from_unit(projected))
    manifest = Path(args.manifest) if args.manifest else Path(args.data) / MANIFEST_NAME
    if manifest.is_file():
        (out / MANIFEST_NAME).write_bytes(manifest.read_bytes())
    ranks = " ".join(f"{b.label.code}={b.rank}" for b in library.bases)
    print(f"projected dataset written to {out} (ranks: {ranks})")
    return 0


def cmd_train(args) -> int:
    _, split = _load_split(args)
    channels, hidden = _parse_arch(args.arch)
    h, w = split.metadata.frame_shape
    arch = convnet.Architecture(
        height=h,
        width=w,
        channels=channels,
        hidden=hidden,
        classes=len(split.metadata.classes),
        seed=args.seed,
    )
    config = convnet.TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch,
        learning_rate=args.lr,
        seed=args.seed,
    )
    data = {
        name: partition_arrays(split.partition(name))
        for name in ("train", "validation", "test", "unseen")
        if split.partition(name)
    }
    result = convnet.train(
        arch, *data["train"], config, validation=data.get("validation")
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    convnet.save_checkpoint(arch, result.params, out / "checkpoint.bin")
    (out / "history.json").write_text(
        json.dumps(result.history, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    scores = {}
    for name in ("validation", "test", "unseen"):
        if name in data:
            images, labels = data[name]
            predicted = convnet.predict(result.params, images)
            scores[name] = float((predicted == labels).mean())
    (out / "evaluation.json").write_text(
        json.dumps(scores, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    last = result.history[-1]
    print(
        f"epochs={args.epochs} final train accuracy {last['train_accuracy']:.3g}"
    )
    for name, value in scores.items():
        print(f"{name} accuracy {value:.3g}")
    print(f"checkpoint and logs under {out}")
    return 0


def cmd_evaluate(args) -> int:
    _, split = _load_split(args)
    if args.library:
        library = load_library(args.library)
        if library.frame_shape != split.metadata.frame_shape:
            raise ConfigError(
                f"library frame shape {library.frame_shape} does not match "
                f"dataset {split.metadata.frame_shape}"
            )
    else:
        rule = _single_rule(args)
        library = build_library(
            split.train,
            split.metadata.frame_shape,
            rank=rule.rank,
            tolerance=rule.tolerance,
            source=f"train partition of {Path(args.data).name}",
        )
    report = baseline_report(library, split)
    for name in ("validation", "test", "unseen"):
        if name in report:
            print(f"{name} accuracy {report[name]['accuracy']:.3g}")
    if args.out:
        Path(args.out).write_text(
            json.dumps(report, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
        print(f"wrote {args.out}")
    return 0


def cmd_experiment(args) -> int:
    _, split = _load_split(args)
    channels, hidden = _parse_arch(args.arch)
    config = ExperimentConfig(
        rules=_rules(args),
        runs=args.runs,
        epochs=args.epochs,
        batch_size=args.batch,
        learning_rate=args.lr,
        seed=args.seed,
        channels=channels,
        hidden=hidden,
    )
    report = run_experiment(split, config)
    for row in report["summary"]:
        print(row)
    if args.out:
        save_report(report, args.out)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(render_report(report))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="podclass",
        description="Per-class subspace preprocessing and classification",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--spec", help="key=value spec file (defaults when omitted)")
    p.add_argument("--seed", type=int, default=None, help="override the spec seed")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest-check", help="validate a dataset tree and its split")
    _add_data_options(p)
    p.set_defaults(func=cmd_ingest_check)

    p = sub.add_parser("build-basis", help="build a per-class basis library")
    _add_data_options(p)
    _add_rule_options(p, repeatable=False)
    p.add_argument("--out", required=True, help="library file to write")
    p.set_defaults(func=cmd_build_basis)

    p = sub.add_parser("spectrum", help="inspect per-class singular spectra")
    _add_data_options(p)
    p.add_argument("--out", help="directory for per-class factor files")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("project", help="project a dataset through class bases")
    _add_data_options(p)
    _add_rule_options(p, repeatable=False)
    p.add_argument("--out", required=True, help="projected dataset directory")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("train", help="train the convolutional classifier")
    _add_data_options(p)
    _add_train_options(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score the nearest-subspace baseline")
    _add_data_options(p)
    _add_rule_options(p, repeatable=False)
    p.add_argument("--library", help="use a saved library instead of building one")
    p.add_argument("--out", help="JSON report path")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("experiment", help="run the full multi-arm protocol")
    _add_data_options(p)
    _add_rule_options(p, repeatable=True)
    p.add_argument("--runs", type=int, default=5)
    _add_train_options(p)
    p.add_argument("--out", help="report JSON path")
    p.set_defaults(func=cmd_experiment)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
