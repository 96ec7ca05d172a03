import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from podclass.errors import ConfigError
from podclass.metrics import (
    Aggregate,
    accuracy,
    aggregate,
    confusion_matrix,
    majority_vote_by_sample,
)


def test_accuracy_basic():
    assert accuracy(np.array([0, 1, 2, 1]), np.array([0, 1, 1, 1])) == 0.75


def test_accuracy_rejects_mismatch():
    with pytest.raises(ConfigError):
        accuracy(np.array([0, 1]), np.array([0]))


def test_confusion_rows_are_true_classes():
    true = np.array([0, 0, 1, 2, 2, 2])
    pred = np.array([0, 1, 1, 2, 0, 2])
    m = confusion_matrix(true, pred, 3)
    assert m.tolist() == [[1, 1, 0], [0, 1, 0], [1, 0, 2]]
    assert m.sum() == true.size
    # diagonal over total equals accuracy
    assert np.trace(m) / m.sum() == accuracy(true, pred)


def test_confusion_rejects_out_of_range():
    with pytest.raises(ConfigError):
        confusion_matrix(np.array([0, 3]), np.array([0, 0]), 3)


def test_aggregate_mean_std():
    agg = aggregate([0.8, 0.9, 1.0])
    assert abs(agg.mean - 0.9) <= 1e-15
    assert abs(agg.std - 0.1) <= 1e-12  # sample std with n-1
    assert agg.count == 3


def test_aggregate_single_value_has_zero_std():
    agg = aggregate([0.7])
    assert agg.mean == 0.7 and agg.std == 0.0 and agg.count == 1


@settings(max_examples=50, deadline=None)
@given(
    st.lists(
        st.floats(min_value=0, max_value=1, allow_nan=False), min_size=1, max_size=12
    ),
    st.randoms(use_true_random=False),
)
def test_aggregate_is_permutation_invariant_bitwise(values, shuffler):
    a = aggregate(values)
    permuted = list(values)
    shuffler.shuffle(permuted)
    b = aggregate(permuted)
    assert (a.mean, a.std, a.values) == (b.mean, b.std, b.values)


def test_aggregate_formats_three_significant_figures():
    agg = Aggregate(mean=0.91234, std=0.01567, count=5, values=(0.9,))
    assert str(agg) == "0.912±0.0157"


def test_majority_vote_groups_by_sample():
    true = np.array([0, 0, 0, 1, 1, 1])
    pred = np.array([0, 1, 0, 1, 0, 0])
    origins = [("s00", 0), ("s00", 1), ("s00", 2), ("s00", 0), ("s00", 1), ("s00", 2)]
    out = majority_vote_by_sample(true, pred, origins)
    # class 0's s00 votes 0 (2 of 3); class 1's s00 votes 0 (2 of 3)
    assert out["samples"] == 2
    assert out["true"].tolist() == [0, 1]
    assert out["predicted"].tolist() == [0, 0]
    assert out["accuracy"] == 0.5


def test_majority_vote_tie_prefers_lowest_class():
    true = np.array([1, 1])
    pred = np.array([2, 0])
    out = majority_vote_by_sample(true, pred, [("a", 0), ("a", 1)])
    assert out["predicted"].tolist() == [0]


def test_majority_vote_needs_aligned_origins():
    with pytest.raises(ConfigError):
        majority_vote_by_sample(np.array([0]), np.array([0]), [])
