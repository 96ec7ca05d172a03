import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from podclass.dataset import (
    ClassLabel,
    Sample,
    SplitPolicy,
    SyntheticSpec,
    assemble_snapshot_matrix,
    flatten_image,
    generate_synthetic,
    group_by_class,
    load_dataset,
    split_dataset,
    split_from_manifest,
    unflatten_image,
    write_manifest,
    write_samples,
)
from podclass.errors import CapacityError, ConfigError, DataError, DataFormatError


def make_samples(n_classes=2, n_samples=4, n_frames=6, side=8, seed=0):
    rng = np.random.default_rng(seed)
    samples = []
    for c in range(n_classes):
        label = ClassLabel(c, f"C{c}")
        for s in range(n_samples):
            frames = [rng.uniform(0, 1, size=(side, side)) for _ in range(n_frames)]
            samples.append(Sample(label, f"s{s:02d}", frames))
    return samples


# -- images and snapshot matrices -------------------------------------------


@settings(max_examples=40, deadline=None)
@given(
    h=st.integers(min_value=1, max_value=12),
    w=st.integers(min_value=1, max_value=12),
    seed=st.integers(min_value=0, max_value=2**16),
)
def test_flatten_unflatten_bijection(h, w, seed):
    image = np.random.default_rng(seed).uniform(0, 1, size=(h, w))
    assert np.array_equal(unflatten_image(flatten_image(image), (h, w)), image)


def test_flatten_is_row_major():
    image = np.arange(6, dtype=float).reshape(2, 3)
    assert np.array_equal(flatten_image(image), np.arange(6, dtype=float))


def test_unflatten_rejects_bad_length():
    with pytest.raises(DataFormatError):
        unflatten_image(np.zeros(5), (2, 3))


def test_snapshot_matrix_columns_are_frames(rng):
    frames = [rng.uniform(0, 1, size=(3, 4)) for _ in range(5)]
    matrix = assemble_snapshot_matrix(frames)
    assert matrix.shape == (12, 5)
    for k, frame in enumerate(frames):
        assert np.array_equal(matrix[:, k], frame.reshape(-1))


def test_snapshot_matrix_rejects_mixed_shapes(rng):
    frames = [rng.uniform(size=(3, 4)), rng.uniform(size=(4, 3))]
    with pytest.raises(DataFormatError):
        assemble_snapshot_matrix(frames)


def test_sample_rejects_mixed_frame_shapes():
    with pytest.raises(DataFormatError):
        Sample(ClassLabel(0, "A"), "s00", [np.zeros((2, 2)), np.zeros((3, 3))])


# -- split policy ------------------------------------------------------------


def test_reference_policy_counts():
    policy = SplitPolicy.reference()
    assert (policy.train_samples, policy.unseen_samples) == (20, 6)
    assert policy.frames_per_sample == 90
    assert (policy.train_frames, policy.validation_frames, policy.test_frames) == (
        1200,
        500,
        100,
    )


def test_proportional_policy_small():
    policy = SplitPolicy.proportional(9, 3, 10)
    assert (policy.train_frames, policy.validation_frames, policy.test_frames) == (
        60,
        25,
        5,
    )


def test_policy_rejects_overdraw():
    with pytest.raises(ConfigError):
        SplitPolicy(2, 1, 10, 15, 5, 3)


def test_policy_for_samples_caps_frames():
    samples = make_samples(n_classes=1, n_samples=26, n_frames=100)
    policy = SplitPolicy.for_samples(samples)
    assert policy.frames_per_sample == 90
    assert policy.unseen_samples == 6
    assert policy.train_samples == 20


# -- split_dataset -----------------------------------------------------------


def test_split_counts_and_disjointness():
    samples = make_samples(n_classes=3, n_samples=12, n_frames=10)
    policy = SplitPolicy.proportional(9, 3, 10)
    split = split_dataset(samples, policy, seed=4)
    counts = split.counts()
    assert counts == {"train": 180, "validation": 75, "test": 15, "unseen": 90}
    # no frame is reused across partitions within a class
    seen = set()
    for name in ("train", "validation", "test", "unseen"):
        for (_, label), (sample_id, k) in zip(
            split.partition(name), split.origins[name]
        ):
            key = (label.id, sample_id, k)
            assert key not in seen
            seen.add(key)


def test_split_unseen_holds_out_whole_samples():
    samples = make_samples(n_classes=2, n_samples=12, n_frames=10)
    policy = SplitPolicy.proportional(9, 3, 10)
    split = split_dataset(samples, policy, seed=4)
    fitted = {
        (label.id, sid)
        for name in ("train", "validation", "test")
        for (_, label), (sid, _) in zip(split.partition(name), split.origins[name])
    }
    held = {
        (label.id, sid)
        for (_, label), (sid, _) in zip(split.unseen, split.origins["unseen"])
    }
    assert fitted and held
    assert not (fitted & held)


def test_split_respects_per_sample_capacity():
    samples = make_samples(n_classes=1, n_samples=12, n_frames=10)
    policy = SplitPolicy.proportional(9, 3, 10)
    split = split_dataset(samples, policy, seed=0)
    per_sample: dict[str, int] = {}
    for name in ("train", "validation", "test"):
        for sid, _ in split.origins[name]:
            per_sample[sid] = per_sample.get(sid, 0) + 1
    assert len(per_sample) == 9
    assert all(v == 10 for v in per_sample.values())


def test_split_blocks_are_contiguous_per_sample():
    samples = make_samples(n_classes=1, n_samples=12, n_frames=10)
    policy = SplitPolicy.proportional(9, 3, 10)
    split = split_dataset(samples, policy, seed=3)
    by_sample: dict[str, dict[str, list[int]]] = {}
    for name in ("train", "validation", "test"):
        for sid, k in split.origins[name]:
            by_sample.setdefault(sid, {}).setdefault(name, []).append(k)
    for sid, blocks in by_sample.items():
        for name, indices in blocks.items():
            lo, hi = min(indices), max(indices)
            assert sorted(indices) == list(range(lo, hi + 1)), (sid, name)


def test_split_deterministic_and_seed_sensitive():
    samples = make_samples(n_classes=2, n_samples=12, n_frames=10)
    policy = SplitPolicy.proportional(9, 3, 10)
    a = split_dataset(samples, policy, seed=5)
    b = split_dataset(samples, policy, seed=5)
    c = split_dataset(samples, policy, seed=6)
    assert a.origins == b.origins
    assert a.origins != c.origins


def test_split_rejects_too_few_samples():
    samples = make_samples(n_classes=1, n_samples=3, n_frames=10)
    policy = SplitPolicy.proportional(9, 3, 10)
    with pytest.raises(CapacityError):
        split_dataset(samples, policy, seed=0)


# -- manifest round trip -----------------------------------------------------


def test_manifest_round_trip(tmp_path):
    samples = make_samples(n_classes=2, n_samples=12, n_frames=10)
    policy = SplitPolicy.proportional(9, 3, 10)
    split = split_dataset(samples, policy, seed=7)
    path = tmp_path / "manifest.tsv"
    write_manifest(split, path)
    again = split_from_manifest(samples, path)
    assert again.origins == split.origins
    for name in ("train", "validation", "test", "unseen"):
        for (img_a, lab_a), (img_b, lab_b) in zip(
            split.partition(name), again.partition(name)
        ):
            assert lab_a == lab_b
            assert np.array_equal(img_a, img_b)


def test_manifest_rejects_overlapping_unseen(tmp_path):
    samples = make_samples(n_classes=1, n_samples=2, n_frames=2)
    lines = [
        "train\tC0\ts00\t0000",
        "unseen\tC0\ts00\t0001",
    ]
    path = tmp_path / "bad.tsv"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(DataFormatError):
        split_from_manifest(samples, path)


def test_manifest_rejects_unknown_sample(tmp_path):
    samples = make_samples(n_classes=1, n_samples=1, n_frames=2)
    path = tmp_path / "bad.tsv"
    path.write_text("train\tC0\tzz\t0000\n")
    with pytest.raises(DataError):
        split_from_manifest(samples, path)


# -- disk round trip ---------------------------------------------------------


def test_write_then_load_dataset(tmp_path):
    samples = make_samples(n_classes=2, n_samples=3, n_frames=4, side=6)
    write_samples(samples, tmp_path / "data")
    loaded = load_dataset(tmp_path / "data")
    assert len(loaded) == len(samples)
    by_key = {(s.label.code, s.sample_id): s for s in loaded}
    for sample in samples:
        twin = by_key[(sample.label.code, sample.sample_id)]
        assert twin.label == sample.label
        for a, b in zip(sample.frames, twin.frames):
            assert np.abs(a - b).max() <= 0.5 / 255 + 1e-12


def test_load_dataset_missing_root(tmp_path):
    with pytest.raises(DataError):
        load_dataset(tmp_path / "nope")


def test_load_dataset_empty_sample_dir(tmp_path):
    (tmp_path / "data" / "C0" / "s00").mkdir(parents=True)
    with pytest.raises(DataError):
        load_dataset(tmp_path / "data")


# -- synthetic generator -----------------------------------------------------


def test_generator_deterministic(tiny_spec):
    a = generate_synthetic(tiny_spec)
    b = generate_synthetic(tiny_spec)
    assert len(a) == len(b)
    for sa, sb in zip(a, b):
        assert sa.label == sb.label and sa.sample_id == sb.sample_id
        for fa, fb in zip(sa.frames, sb.frames):
            assert np.array_equal(fa, fb)


def test_generator_exact_rank_without_noise():
    spec = SyntheticSpec(
        class_count=3,
        frames_per_class=30,
        image_side=16,
        intrinsic_rank=4,
        noise_level=0.0,
        seed=11,
    )
    for label, group in group_by_class(generate_synthetic(spec)).items():
        frames = [f for s in group for f in s.frames]
        matrix = assemble_snapshot_matrix(frames)
        sv = np.linalg.svd(matrix, compute_uv=False)
        assert int((sv > sv[0] * 1e-10).sum()) == 4, label.code


def test_generator_values_in_range(tiny_samples):
    for sample in tiny_samples:
        for frame in sample.frames:
            assert frame.min() >= 0.0 and frame.max() <= 1.0


def test_generator_counts(tiny_spec, tiny_samples):
    grouped = group_by_class(tiny_samples)
    assert len(grouped) == tiny_spec.class_count
    for group in grouped.values():
        assert sum(len(s.frames) for s in group) == tiny_spec.frames_per_class
        assert len(group) == 12


def test_spec_config_round_trip(tmp_path, tiny_spec):
    path = tmp_path / "spec.txt"
    path.write_text(tiny_spec.to_config_text())
    assert SyntheticSpec.from_config_file(path) == tiny_spec


def test_spec_config_rejects_unknown_key(tmp_path):
    path = tmp_path / "spec.txt"
    path.write_text("classes=3\nwhat=1\n")
    with pytest.raises(ConfigError):
        SyntheticSpec.from_config_file(path)


def test_spec_rejects_bad_rank():
    with pytest.raises(ConfigError):
        SyntheticSpec(frames_per_class=10, intrinsic_rank=10)
