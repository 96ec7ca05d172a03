import json

import numpy as np
import pytest

from podclass.basis import build_library
from podclass.errors import ConfigError
from podclass.experiment import (
    LEAK_NOTE,
    ExperimentConfig,
    TruncationRule,
    baseline_report,
    render_report,
    run_experiment,
    save_report,
)


@pytest.fixture(scope="module")
def small_config():
    return ExperimentConfig(
        rules=(TruncationRule(rank=3),),
        runs=2,
        epochs=2,
        batch_size=16,
        learning_rate=1e-3,
        seed=0,
        channels=(2, 2, 2),
        hidden=4,
    )


@pytest.fixture(scope="module")
def small_report(tiny_split, small_config):
    return run_experiment(tiny_split, small_config)


def test_rule_naming():
    assert TruncationRule(rank=7).arm_name == "projected-r7"
    assert TruncationRule(tolerance=0.05).arm_name == "projected-tol0.05"
    assert TruncationRule().arm_name == "projected-auto"
    with pytest.raises(ConfigError):
        TruncationRule(rank=2, tolerance=0.1)


def test_config_rejects_duplicate_arms():
    with pytest.raises(ConfigError):
        ExperimentConfig(rules=(TruncationRule(rank=3), TruncationRule(rank=3)))


def test_report_has_raw_and_projected_arms(small_report):
    assert small_report["protocol"]["arm_order"] == ["raw", "projected-r3"]
    assert set(small_report["arms"]) == {"raw", "projected-r3"}
    assert small_report["arms"]["raw"]["kind"] == "raw"
    assert small_report["arms"]["projected-r3"]["kind"] == "projected"


def test_report_carries_leak_note(small_report):
    assert LEAK_NOTE in small_report["protocol"]["notes"]


def test_report_run_count_and_seeds(small_report, small_config):
    for arm in small_report["arms"].values():
        runs = arm["network"]["runs"]
        assert len(runs) == small_config.runs
        assert [r["seed"] for r in runs] == [0, 1]
        for partition in ("validation", "test", "unseen"):
            agg = arm["network"]["aggregate"][partition]
            assert agg.count == small_config.runs
            assert 0.0 <= agg.mean <= 1.0


def test_baseline_present_per_arm(small_report):
    for arm in small_report["arms"].values():
        for partition in ("validation", "test", "unseen"):
            section = arm["baseline"][partition]
            assert 0.0 <= section["accuracy"] <= 1.0
            matrix = np.array(section["confusion"])
            assert matrix.shape == (3, 3)
            assert matrix.sum() > 0


def test_summary_row_format(small_report):
    rows = small_report["summary"]
    assert len(rows) == 2
    for row in rows:
        cells = row.split("\t")
        assert cells[0] in ("raw", "projected-r3")
        assert cells[1].startswith("validation ")
        assert cells[2].startswith("testing ")
        assert cells[3].startswith("unseen ")
        assert "±" in cells[1]


def test_reports_are_bit_identical(tiny_split, small_config, small_report):
    again = run_experiment(tiny_split, small_config)
    assert render_report(again) == render_report(small_report)


def test_render_report_is_valid_sorted_json(small_report, tmp_path):
    text = render_report(small_report)
    parsed = json.loads(text)
    assert list(parsed.keys()) == sorted(parsed.keys())
    path = tmp_path / "report.json"
    save_report(small_report, path)
    assert path.read_text(encoding="utf-8") == text


def test_baseline_report_standalone(tiny_split):
    library = build_library(tiny_split.train, tiny_split.metadata.frame_shape, rank=3)
    out = baseline_report(library, tiny_split)
    assert set(out) == {"validation", "test", "unseen"}
    assert out["unseen"]["accuracy"] == 1.0
