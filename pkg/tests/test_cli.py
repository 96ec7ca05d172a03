import json

import numpy as np
import pytest

from podclass.cli import main
from podclass.convnet import load_checkpoint
from podclass.dataset import load_dataset
from podclass.basis import load_library


@pytest.fixture(scope="module")
def spec_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("spec") / "spec.txt"
    path.write_text(
        "classes=3\nframes=36\nside=16\nrank=3\nnoise=0.1\nseed=9\n",
        encoding="utf-8",
    )
    return path


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory, spec_file):
    out = tmp_path_factory.mktemp("cli") / "data"
    assert main(["synth", "--spec", str(spec_file), "--out", str(out)]) == 0
    return out


def test_synth_writes_tree_and_manifest(data_dir):
    assert (data_dir / "manifest.tsv").is_file()
    assert (data_dir / "spec.txt").is_file()
    assert (data_dir / "C0" / "s00" / "0000.pgm").is_file()
    samples = load_dataset(data_dir)
    assert len(samples) == 36


def test_synth_is_deterministic(tmp_path, spec_file, data_dir):
    again = tmp_path / "data2"
    assert main(["synth", "--spec", str(spec_file), "--out", str(again)]) == 0
    assert (again / "manifest.tsv").read_bytes() == (
        data_dir / "manifest.tsv"
    ).read_bytes()
    a = (data_dir / "C1" / "s03" / "0001.pgm").read_bytes()
    b = (again / "C1" / "s03" / "0001.pgm").read_bytes()
    assert a == b


def test_ingest_check_passes(data_dir, capsys):
    assert main(["ingest-check", "--data", str(data_dir)]) == 0
    out = capsys.readouterr().out
    assert "classes: 3" in out and "ok" in out


def test_ingest_check_missing_data(tmp_path):
    assert main(["ingest-check", "--data", str(tmp_path / "nope")]) == 3


def test_build_basis_and_evaluate(data_dir, tmp_path, capsys):
    lib = tmp_path / "lib.bin"
    assert main(
        ["build-basis", "--data", str(data_dir), "--rank", "3", "--out", str(lib)]
    ) == 0
    library = load_library(lib)
    assert [b.rank for b in library.bases] == [3, 3, 3]
    capsys.readouterr()
    assert main(
        ["evaluate", "--data", str(data_dir), "--library", str(lib)]
    ) == 0
    out = capsys.readouterr().out
    assert "unseen accuracy" in out


def test_spectrum_writes_factors(data_dir, tmp_path, capsys):
    out_dir = tmp_path / "factors"
    assert main(
        ["spectrum", "--data", str(data_dir), "--out", str(out_dir)]
    ) == 0
    assert (out_dir / "C0.factors").is_file()
    text = capsys.readouterr().out
    assert "leading sigma" in text


def test_project_writes_clamped_tree(data_dir, tmp_path):
    out = tmp_path / "proj"
    assert main(
        ["project", "--data", str(data_dir), "--rank", "3", "--out", str(out)]
    ) == 0
    projected = load_dataset(out)
    assert len(projected) == 36
    assert (out / "manifest.tsv").read_bytes() == (
        data_dir / "manifest.tsv"
    ).read_bytes()
    for sample in projected:
        for frame in sample.frames:
            assert frame.min() >= 0.0 and frame.max() <= 1.0


def test_train_writes_outputs(data_dir, tmp_path):
    out = tmp_path / "model"
    assert main(
        [
            "train", "--data", str(data_dir), "--epochs", "2", "--batch", "16",
            "--arch", "2,4,4,8", "--out", str(out),
        ]
    ) == 0
    arch, params = load_checkpoint(out / "checkpoint.bin")
    assert arch.classes == 3 and arch.height == 16
    history = json.loads((out / "history.json").read_text())
    assert len(history) == 2
    scores = json.loads((out / "evaluation.json").read_text())
    assert set(scores) == {"validation", "test", "unseen"}


def test_experiment_writes_deterministic_report(data_dir, tmp_path, capsys):
    args = [
        "experiment", "--data", str(data_dir), "--rank", "3", "--runs", "1",
        "--epochs", "2", "--batch", "16", "--arch", "2,4,4,8",
    ]
    r1 = tmp_path / "r1.json"
    r2 = tmp_path / "r2.json"
    assert main(args + ["--out", str(r1)]) == 0
    summary = capsys.readouterr().out
    assert "raw\tvalidation " in summary
    assert main(args + ["--out", str(r2)]) == 0
    assert r1.read_bytes() == r2.read_bytes()
    report = json.loads(r1.read_text())
    assert report["protocol"]["arm_order"] == ["raw", "projected-r3"]


def test_bad_arguments_exit_2(data_dir):
    assert main(
        ["build-basis", "--data", str(data_dir), "--rank", "0", "--out", "/tmp/x"]
    ) == 2
    assert main(
        [
            "experiment", "--data", str(data_dir), "--rank", "3", "--rank", "3",
            "--runs", "1", "--epochs", "1",
        ]
    ) == 2
    assert main(
        ["train", "--data", str(data_dir), "--arch", "1,2", "--out", "/tmp/x"]
    ) == 2


def test_corrupt_data_exit_3(tmp_path):
    root = tmp_path / "broken"
    (root / "C0" / "s00").mkdir(parents=True)
    (root / "C0" / "s00" / "0000.pgm").write_bytes(b"P5\n4 4\n255\n" + bytes(3))
    assert main(["ingest-check", "--data", str(root)]) == 3
