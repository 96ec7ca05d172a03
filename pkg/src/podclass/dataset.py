"""Labeled image ensembles: disk ingestion, synthesis, and partitioning.

An image is a 2-D float64 array with values in [0, 1]; a sample is one
recording (an ordered stack of frames sharing a shape, all with one label).
Datasets are partitioned at sample granularity into hold-out ("unseen")
samples and training samples, whose frames are then dealt frame-wise into
train / validation / test.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import CapacityError, ConfigError, DataError, DataFormatError
from .pgm import from_unit, read_pgm, to_unit, write_pgm

PARTITIONS = ("train", "validation", "test", "unseen")

# Synthetic generator constants. The shared background makes class
# subspaces overlap so classification is not trivially perfect; the peak
# keeps noise-free pixel values inside [0, 1] so clamping never distorts
# the constructed low-rank structure. Peaking at mid-range leaves the
# class signal well below strong additive noise, the regime where
# subspace denoising earns its keep.
BACKGROUND_WEIGHT = 0.2
COEFF_RANGE = (0.2, 1.0)
PEAK_INTENSITY = 0.5
MAX_SAMPLES_PER_CLASS = 12

# Reference protocol takes the first 90 frames of each recording even when
# more are stored; derived policies inherit that cap.
DEFAULT_FRAME_CAP = 90

_PROPORTIONS = (12, 5, 1)  # train : validation : test, out of 18


@dataclass(frozen=True)
class ClassLabel:
    """One class in the roster: a stable integer id plus a short code."""

    id: int
    code: str


@dataclass
class Sample:
    """One recording: an ordered list of same-shaped frames with one label."""

    label: ClassLabel
    sample_id: str
    frames: list[np.ndarray]

    def __post_init__(self) -> None:
        if not self.frames:
            raise DataFormatError(f"sample {self.sample_id}: no frames")
        shape = self.frames[0].shape
        for k, frame in enumerate(self.frames):
            if frame.shape != shape:
                raise DataFormatError(
                    f"sample {self.sample_id}: frame {k} is {frame.shape}, "
                    f"expected {shape}"
                )

    @property
    def frame_shape(self) -> tuple[int, int]:
        return self.frames[0].shape


@dataclass(frozen=True)
class SplitMetadata:
    view: str
    frame_shape: tuple[int, int]
    classes: tuple[ClassLabel, ...]


Pair = tuple[np.ndarray, ClassLabel]
Origin = tuple[str, int]  # (sample_id, frame index within the sample)


@dataclass
class DatasetSplit:
    """Four disjoint frame partitions plus per-frame sample provenance.

    ``origins[p][i]`` names the sample and frame index that produced pair
    ``i`` of partition ``p``; it is what the manifest serializes and what
    per-sample aggregation needs.
    """

    train: list[Pair]
    validation: list[Pair]
    test: list[Pair]
    unseen: list[Pair]
    metadata: SplitMetadata
    origins: dict[str, tuple[Origin, ...]] = field(default_factory=dict)

    def partition(self, name: str) -> list[Pair]:
        if name not in PARTITIONS:
            raise ConfigError(f"unknown partition {name!r}")
        return getattr(self, name)

    def counts(self) -> dict[str, int]:
        return {name: len(self.partition(name)) for name in PARTITIONS}


@dataclass(frozen=True)
class SplitPolicy:
    """Per-class split counts.

    ``train_samples`` recordings feed the frame-wise train/validation/test
    pools; ``unseen_samples`` whole recordings are held out. From each used
    recording the first ``frames_per_sample`` frames are taken.
    """

    train_samples: int
    unseen_samples: int
    frames_per_sample: int
    train_frames: int
    validation_frames: int
    test_frames: int

    def __post_init__(self) -> None:
        if self.train_samples < 1 or self.unseen_samples < 0:
            raise ConfigError("need at least one training sample per class")
        if self.frames_per_sample < 1:
            raise ConfigError("frames_per_sample must be positive")
        pool = self.train_samples * self.frames_per_sample
        need = self.train_frames + self.validation_frames + self.test_frames
        if need > pool:
            raise ConfigError(
                f"policy asks for {need} frames per class but only "
                f"{pool} are available from training samples"
            )
        if min(self.train_frames, self.validation_frames, self.test_frames) < 0:
            raise ConfigError("frame counts must be nonnegative")

    @classmethod
    def proportional(
        cls, train_samples: int, unseen_samples: int, frames_per_sample: int
    ) -> "SplitPolicy":
        """Scale the reference 1200/500/100-per-1800 proportions, rounding down."""
        pool = train_samples * frames_per_sample
        t, v, s = (pool * p // sum(_PROPORTIONS) for p in _PROPORTIONS)
        return cls(train_samples, unseen_samples, frames_per_sample, t, v, s)

    @classmethod
    def reference(cls) -> "SplitPolicy":
        """The reference configuration: 26 recordings per class, 90 frames each,
        20 training + 6 hold-out, frames dealt 1200/500/100."""
        return cls.proportional(20, 6, 90)

    @classmethod
    def for_samples(
        cls, samples: Sequence[Sample], frame_cap: int = DEFAULT_FRAME_CAP
    ) -> "SplitPolicy":
        """Derive a proportional policy from the data itself.

        Keeps the reference hold-out ratio (6 of 26 recordings) and caps
        frames per recording at ``frame_cap``.
        """
        by_class = group_by_class(samples)
        n = min(len(group) for group in by_class.values())
        f = min(min(len(s.frames) for s in group) for group in by_class.values())
        f = min(f, frame_cap)
        unseen = max(1, round(n * 6 / 26)) if n > 1 else 0
        return cls.proportional(n - unseen, unseen, f)


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the synthetic desk-scale dataset generator."""

    class_count: int = 5
    frames_per_class: int = 120
    image_side: int = 64
    intrinsic_rank: int = 5
    noise_level: float = 0.05
    seed: int = 7

    def __post_init__(self) -> None:
        if self.class_count < 1:
            raise ConfigError("class_count must be positive")
        if self.intrinsic_rank < 1 or self.intrinsic_rank >= self.frames_per_class:
            raise ConfigError("need 1 <= intrinsic_rank < frames_per_class")
        if self.image_side < 8:
            raise ConfigError("image_side must be at least 8")
        if self.noise_level < 0:
            raise ConfigError("noise_level must be nonnegative")

    @classmethod
    def from_config_file(cls, path: str | Path) -> "SyntheticSpec":
        """Parse a key=value config file (keys: classes, frames, side, rank,
        noise, seed; '#' starts a comment)."""
        keys = {
            "classes": "class_count",
            "frames": "frames_per_class",
            "side": "image_side",
            "rank": "intrinsic_rank",
            "noise": "noise_level",
            "seed": "seed",
        }
        values: dict[str, float] = {}
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read spec file {path}: {exc}") from exc
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
            key, _, value = (part.strip() for part in line.partition("="))
            if key not in keys:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                values[keys[key]] = float(value) if key == "noise" else int(value)
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}") from exc
        return cls(**values)  # type: ignore[arg-type]

    def to_config_text(self) -> str:
        return (
            f"classes={self.class_count}\n"
            f"frames={self.frames_per_class}\n"
            f"side={self.image_side}\n"
            f"rank={self.intrinsic_rank}\n"
            f"noise={self.noise_level:g}\n"
            f"seed={self.seed}\n"
        )


def validate_image(image: np.ndarray, where: str = "image") -> np.ndarray:
    """Check the stored-image contract: 2-D, float64, finite, within [0, 1]."""
    image = np.asarray(image)
    if image.ndim != 2:
        raise DataFormatError(f"{where}: expected 2-D pixels, got shape {image.shape}")
    if not np.isfinite(image).all():
        raise DataFormatError(f"{where}: non-finite pixel values")
    if image.min() < 0.0 or image.max() > 1.0:
        raise DataFormatError(f"{where}: pixel values outside [0, 1]")
    return np.asarray(image, dtype=np.float64)


def flatten_image(image: np.ndarray) -> np.ndarray:
    """Row-major scan of a frame into a length h*w vector."""
    return np.asarray(image, dtype=np.float64).reshape(-1)


def unflatten_image(vector: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Inverse of :func:`flatten_image` for the given (height, width)."""
    vector = np.asarray(vector, dtype=np.float64)
    if vector.size != shape[0] * shape[1]:
        raise DataFormatError(
            f"vector of length {vector.size} does not fit shape {shape}"
        )
    return vector.reshape(shape)


def assemble_snapshot_matrix(frames: Sequence[np.ndarray]) -> np.ndarray:
    """Stack flattened frames as the columns of a J x K matrix."""
    if len(frames) == 0:
        raise CapacityError("cannot assemble a snapshot matrix from zero frames")
    shape = np.asarray(frames[0]).shape
    j = int(np.prod(shape))
    matrix = np.empty((j, len(frames)), dtype=np.float64)
    for k, frame in enumerate(frames):
        frame = np.asarray(frame)
        if frame.shape != shape:
            raise DataFormatError(
                f"frame {k} has shape {frame.shape}, expected {shape}"
            )
        matrix[:, k] = frame.reshape(-1)
    return matrix


def group_by_class(samples: Iterable[Sample]) -> dict[ClassLabel, list[Sample]]:
    grouped: dict[ClassLabel, list[Sample]] = {}
    for sample in samples:
        grouped.setdefault(sample.label, []).append(sample)
    return {label: grouped[label] for label in sorted(grouped, key=lambda l: l.id)}


def class_roster(samples: Iterable[Sample]) -> tuple[ClassLabel, ...]:
    return tuple(group_by_class(samples).keys())


# ---------------------------------------------------------------------------
# Disk ingestion / export
# ---------------------------------------------------------------------------

_FRAME_RE = re.compile(r"^\d+\.pgm$")


def load_dataset(root: str | Path, layout: str = "class/sample/frame") -> list[Sample]:
    """Load a ``<root>/<class_code>/<sample_id>/<index>.pgm`` tree.

    Classes get ids in sorted directory order; frames are sorted by
    filename and rescaled from 8-bit storage to [0, 1].
    """
    if layout != "class/sample/frame":
        raise ConfigError(f"unsupported dataset layout {layout!r}")
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"dataset root {root} does not exist")
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not class_dirs:
        raise DataError(f"dataset root {root} has no class directories")
    samples: list[Sample] = []
    for class_id, class_dir in enumerate(class_dirs):
        label = ClassLabel(class_id, class_dir.name)
        sample_dirs = sorted(p for p in class_dir.iterdir() if p.is_dir())
        if not sample_dirs:
            raise DataError(f"class directory {class_dir} has no sample directories")
        for sample_dir in sample_dirs:
            frame_files = sorted(
                p for p in sample_dir.iterdir() if _FRAME_RE.match(p.name)
            )
            if not frame_files:
                raise DataError(f"sample directory {sample_dir} has no .pgm frames")
            frames = [to_unit(read_pgm(p)) for p in frame_files]
            samples.append(Sample(label, sample_dir.name, frames))
    return samples


def write_samples(samples: Sequence[Sample], root: str | Path) -> None:
    """Export samples as the PGM directory layout (clamped 8-bit frames)."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for sample in samples:
        sample_dir = root / sample.label.code / sample.sample_id
        sample_dir.mkdir(parents=True, exist_ok=True)
        for k, frame in enumerate(sample.frames):
            write_pgm(sample_dir / f"{k:04d}.pgm", from_unit(frame))


def write_manifest(split: DatasetSplit, path: str | Path) -> None:
    """Write the split as one ``partition\\tclass\\tsample\\tframe`` line per frame."""
    code_of = {label.id: label.code for label in split.metadata.classes}
    lines = []
    for name in PARTITIONS:
        pairs = split.partition(name)
        origins = split.origins.get(name, ())
        if len(origins) != len(pairs):
            raise DataFormatError(f"partition {name}: origins out of sync with pairs")
        for (_, label), (sample_id, frame_idx) in zip(pairs, origins):
            lines.append(f"{name}\t{code_of[label.id]}\t{sample_id}\t{frame_idx:04d}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def split_from_manifest(
    samples: Sequence[Sample], path: str | Path, view: str = ""
) -> DatasetSplit:
    """Rebuild a split from a manifest file, in manifest line order."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"manifest {path} does not exist")
    if not samples:
        raise CapacityError("no samples to apply the manifest to")
    roster = class_roster(samples)
    by_key = {(s.label.code, s.sample_id): s for s in samples}
    parts: dict[str, list[Pair]] = {name: [] for name in PARTITIONS}
    origins: dict[str, list[Origin]] = {name: [] for name in PARTITIONS}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not raw.strip():
            continue
        fields = raw.split("\t")
        if len(fields) != 4:
            raise DataFormatError(f"{path}:{lineno}: expected 4 tab-separated fields")
        part, code, sample_id, frame_tok = fields
        if part not in PARTITIONS:
            raise DataFormatError(f"{path}:{lineno}: unknown partition {part!r}")
        sample = by_key.get((code, sample_id))
        if sample is None:
            raise DataError(f"{path}:{lineno}: no sample {code}/{sample_id} in data")
        frame_idx = int(frame_tok)
        if not 0 <= frame_idx < len(sample.frames):
            raise DataError(
                f"{path}:{lineno}: frame {frame_idx} out of range for "
                f"{code}/{sample_id}"
            )
        parts[part].append((sample.frames[frame_idx], sample.label))
        origins[part].append((sample_id, frame_idx))
    # Sample ids are only unique within a class, so the unseen-overlap
    # check keys on (class, sample).
    used = {
        (pair[1].code, o[0])
        for name in ("train", "validation", "test")
        for pair, o in zip(parts[name], origins[name])
    }
    held = {
        (pair[1].code, o[0]) for pair, o in zip(parts["unseen"], origins["unseen"])
    }
    if used & held:
        raise DataFormatError(
            f"{path}: samples {sorted(used & held)} appear both in training "
            "partitions and in unseen"
        )
    shape = samples[0].frame_shape
    meta = SplitMetadata(view=view, frame_shape=shape, classes=roster)
    return DatasetSplit(
        train=parts["train"],
        validation=parts["validation"],
        test=parts["test"],
        unseen=parts["unseen"],
        metadata=meta,
        origins={name: tuple(origins[name]) for name in PARTITIONS},
    )


# ---------------------------------------------------------------------------
# Partitioning
# ---------------------------------------------------------------------------


def _deal_quotas(
    counts: tuple[int, int, int], n_samples: int, capacity: int
) -> list[tuple[int, int, int]]:
    """Split per-class frame counts across samples.

    Every sample first gets the floor share of each partition; the
    remainders are dealt one frame at a time round-robin (rarest partition
    first) skipping samples already at capacity, so the spread stays as
    even as the counts allow.
    """
    quotas = [[count // n_samples] * n_samples for count in counts]
    used = [sum(q[i] for q in quotas) for i in range(n_samples)]
    pos = 0
    for part in (2, 1, 0):  # test, validation, train
        remainder = counts[part] - (counts[part] // n_samples) * n_samples
        for _ in range(remainder):
            hops = 0
            while used[pos % n_samples] >= capacity:
                pos += 1
                hops += 1
                if hops > n_samples:
                    raise CapacityError("cannot place frame quota within capacity")
            quotas[part][pos % n_samples] += 1
            used[pos % n_samples] += 1
            pos += 1
    return [tuple(q[i] for q in quotas) for i in range(n_samples)]


def split_dataset(
    samples: Sequence[Sample], policy: SplitPolicy, seed: int, view: str = ""
) -> DatasetSplit:
    """Partition samples per the policy, deterministically under ``seed``.

    Hold-out samples enter ``unseen`` whole; each remaining training
    sample's frames are cut into up to three contiguous blocks whose order
    is a seeded permutation of (train, validation, test), so no partition
    systematically receives the early frames of every recording.
    """
    by_class = group_by_class(samples)
    if not by_class:
        raise CapacityError("no samples to split")
    shape = samples[0].frame_shape
    for sample in samples:
        if sample.frame_shape != shape:
            raise DataFormatError(
                f"sample {sample.sample_id} has frame shape {sample.frame_shape}, "
                f"expected {shape}"
            )
    needed = policy.train_samples + policy.unseen_samples
    rng = np.random.default_rng(seed)
    parts: dict[str, list[Pair]] = {name: [] for name in PARTITIONS}
    origins: dict[str, list[Origin]] = {name: [] for name in PARTITIONS}
    for label, group in by_class.items():
        if len(group) < needed:
            raise CapacityError(
                f"class {label.code}: {len(group)} samples, policy needs {needed}"
            )
        group = sorted(group, key=lambda s: s.sample_id)
        order = rng.permutation(len(group))
        chosen = [group[i] for i in order[:needed]]
        for sample in chosen:
            if len(sample.frames) < policy.frames_per_sample:
                raise CapacityError(
                    f"class {label.code}: sample {sample.sample_id} has "
                    f"{len(sample.frames)} frames, policy needs "
                    f"{policy.frames_per_sample}"
                )
        training = chosen[: policy.train_samples]
        holdout = chosen[policy.train_samples :]
        counts = (policy.train_frames, policy.validation_frames, policy.test_frames)
        quotas = _deal_quotas(counts, policy.train_samples, policy.frames_per_sample)
        block_names = ("train", "validation", "test")
        for sample, quota in zip(training, quotas):
            perm = rng.permutation(3)
            cursor = 0
            for which in perm:
                name = block_names[which]
                size = quota[which]
                for k in range(cursor, cursor + size):
                    parts[name].append((sample.frames[k], label))
                    origins[name].append((sample.sample_id, k))
                cursor += size
        for sample in holdout:
            for k in range(policy.frames_per_sample):
                parts["unseen"].append((sample.frames[k], label))
                origins["unseen"].append((sample.sample_id, k))
    meta = SplitMetadata(view=view, frame_shape=shape, classes=tuple(by_class.keys()))
    return DatasetSplit(
        train=parts["train"],
        validation=parts["validation"],
        test=parts["test"],
        unseen=parts["unseen"],
        metadata=meta,
        origins={name: tuple(origins[name]) for name in PARTITIONS},
    )


def partition_arrays(pairs: Sequence[Pair]) -> tuple[np.ndarray, np.ndarray]:
    """Stack a partition into (N, H, W) images and (N,) integer labels."""
    if not pairs:
        raise CapacityError("empty partition")
    images = np.stack([np.asarray(img, dtype=np.float64) for img, _ in pairs])
    labels = np.array([label.id for _, label in pairs], dtype=np.int64)
    return images, labels


# ---------------------------------------------------------------------------
# Synthetic generation
# ---------------------------------------------------------------------------


def generate_synthetic(spec: SyntheticSpec) -> list[Sample]:
    """Build a deterministic low-rank-plus-noise dataset.

    Each class owns ``intrinsic_rank`` orthonormal spatial patterns with
    mutually disjoint pixel supports (hence exactly known rank); a shared
    nonnegative background pattern is mixed into every class at weight
    ``BACKGROUND_WEIGHT`` so the class subspaces overlap. Frames are
    nonnegative random combinations of the class patterns, globally scaled
    so noise-free values stay inside [0, 1], plus Gaussian noise clamped to
    [0, 1].
    """
    side, n_classes, rank = spec.image_side, spec.class_count, spec.intrinsic_rank
    j = side * side
    if n_classes * rank > j:
        raise CapacityError(
            f"{n_classes} classes x rank {rank} patterns need disjoint supports "
            f"but only {j} pixels exist"
        )
    rng = np.random.default_rng(spec.seed)

    support = rng.permutation(j)
    block = j // (n_classes * rank)
    background = rng.uniform(0.25, 1.0, size=j)
    background /= np.linalg.norm(background)

    patterns = np.zeros((n_classes, j, rank))
    for c in range(n_classes):
        for m in range(rank):
            idx = support[(c * rank + m) * block : (c * rank + m + 1) * block]
            values = rng.uniform(0.25, 1.0, size=len(idx))
            patterns[c][idx, m] = values / np.linalg.norm(values)
    mixed = patterns + BACKGROUND_WEIGHT * background[None, :, None]

    n_samples = min(MAX_SAMPLES_PER_CLASS, spec.frames_per_class)
    frames_of = [spec.frames_per_class // n_samples] * n_samples
    for i in range(spec.frames_per_class % n_samples):
        frames_of[i] += 1

    lo, hi = COEFF_RANGE
    clean: list[list[np.ndarray]] = []
    for c in range(n_classes):
        per_class = []
        for _ in range(spec.frames_per_class):
            coeffs = rng.uniform(lo, hi, size=rank)
            per_class.append(mixed[c] @ coeffs)
        clean.append(per_class)
    scale = PEAK_INTENSITY / max(vec.max() for cls in clean for vec in cls)

    samples: list[Sample] = []
    for c in range(n_classes):
        label = ClassLabel(c, f"C{c}")
        cursor = 0
        for s, count in enumerate(frames_of):
            frames = []
            for _ in range(count):
                pixels = clean[c][cursor] * scale
                cursor += 1
                if spec.noise_level > 0:
                    pixels = pixels + rng.normal(0.0, spec.noise_level, size=j)
                frames.append(np.clip(pixels, 0.0, 1.0).reshape(side, side))
            samples.append(Sample(label, f"s{s:02d}", frames))
    return samples
