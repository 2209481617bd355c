import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twofold.metrics import (
    UndefinedMetricError,
    auc_roc,
    compressed_scale,
    confusion_counts,
    mase,
    mase_i,
    mase_ii,
    naive_scale,
    spec,
    spec_terms,
    thresholded_auc,
)


def spec_oracle(f, y, a1=0.5, a2=0.5):
    """Direct double loop over (t, i)."""
    n = len(y)
    total = 0.0
    for t in range(n):
        for i in range(t + 1):
            opp = min(y[i], sum(y[: i + 1]) - sum(f[: t + 1])) * a1
            stock = min(f[i], sum(f[: i + 1]) - sum(y[: t + 1])) * a2
            total += max(0.0, opp, stock) * (t - i + 1)
    return total / n


def test_auc_examples():
    assert auc_roc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    assert auc_roc([0.3] * 6, [0, 1, 0, 1, 0, 0]) == 0.5
    rng = np.random.default_rng(0)
    assert abs(auc_roc(rng.random(10000), rng.random(10000) < 0.5) - 0.5) <= 0.02
    with pytest.raises(UndefinedMetricError):
        auc_roc([0.1, 0.2], [1, 1])


def test_thresholded_auc_and_confusion():
    scores = np.array([0.9, 0.6, 0.4, 0.2])
    labels = np.array([1, 0, 1, 0], bool)
    assert thresholded_auc(scores, labels) == 0.5
    assert confusion_counts(scores >= 0.5, labels) == {"tp": 1, "fp": 1, "fn": 1, "tn": 1}


def test_mase_examples():
    assert mase([11, 11, 11], [10, 12, 11], 2.0) == pytest.approx(1 / 3, abs=1e-15)
    train = np.array([3.0, 7, 2, 9, 4])
    assert mase(train[:-1], train[1:], naive_scale(train)) == 1.0
    assert mase(train, train, naive_scale(train)) == 0.0
    with pytest.raises(UndefinedMetricError):
        naive_scale([5, 5, 5])


def test_mase_i_examples():
    # compressed [3, 6, 3, 6] split 2/2; SES with alpha = 1 forecasts the last value, 6
    train, test = np.array([3.0, 0, 6]), np.array([0, 3.0, 0, 6])
    assert compressed_scale(train) == 3.0
    assert mase_i(np.full(4, 6.0), test, train) == pytest.approx((3 + 0) / 2 / 3)
    naive_in_sample = np.array([0, 3.0, 0, 6, 0, 3])
    assert mase_i([0, 0, 0, 3, 0, 6], naive_in_sample, [3, 6, 3]) == 1.0


def test_mase_ii_construction():
    train = [2.0, 0, 4, 0, 2]
    y = np.array([0, 5.0, 0, 3])
    flags = np.array([False, True, False, True])
    size = np.array([9.0, 5, 9, 3])
    combined = np.where(flags, size, 0)
    assert mase_ii(flags, combined, y, train) == mase_i(size, y, train) == 0.0
    assert mase_ii(flags | [True, 0, 0, 0], np.where(flags | [True, 0, 0, 0], size, 0), y, train) == \
        pytest.approx(9 / 3 / 2)  # one false alarm adds |s|
    missed = np.array([False, True, False, False])
    assert mase_ii(missed, np.where(missed, size, 0), y, train) == pytest.approx(3 / 2 / 2)


def test_spec_examples():
    assert spec([1, 0, 2, 0], [1, 0, 2, 0]) == 0.0
    # demand 4 at period 0, nothing forecast: opportunity 0.5*4 weighted 1, 2, 3
    assert spec([0, 0, 0], [4, 0, 0]) == pytest.approx(2 * (1 + 2 + 3) / 3)
    f, y = [0, 3, 1, 0], [2, 0, 0, 4]
    assert spec(f, y) == pytest.approx(spec_oracle(f, y), rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 9), st.integers(0, 9)), min_size=1, max_size=12))
def test_spec_one_sided_and_matches_oracle(pairs):
    f = [float(a) for a, _ in pairs]
    y = [float(b) for _, b in pairs]
    opp, stock = spec_terms(f, y)
    assert not np.any((opp > 0) & (stock > 0))
    assert spec(f, y) == pytest.approx(spec_oracle(f, y), rel=1e-9, abs=1e-12)
