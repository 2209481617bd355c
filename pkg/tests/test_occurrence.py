import datetime as dt

import numpy as np
import pandas as pd
import pytest
from scipy.stats import kurtosis, skew

from twofold.core import DemandSeries
from twofold.metrics import auc_roc
from twofold.occurrence import (
    BoostedClassifier,
    BoostingParams,
    OCCURRENCE_FEATURES,
    SchemaError,
    extract_occurrence_features,
    feature_columns,
    fit_boosted,
    fit_hybrid_mlp,
    fit_markov,
    focal_grad,
    focal_grad_hess,
    focal_loss,
    hybrid_inputs,
    logloss_grad_hess,
    newton_hessian,
    predict_occurrence,
)
from twofold.occurrence.features import _shape_moments

from conftest import START, series_of

MON = START


def mondays_only(weeks=60, size=5.0):
    v = np.zeros(7 * weeks)
    v[::7] = size
    return series_of(v)


def test_monday_pattern_features():
    s = mondays_only()
    target = MON + dt.timedelta(days=7 * 40)
    rows, skipped = extract_occurrence_features([s], [target], 14)
    assert skipped == 0
    r = rows.iloc[0]
    assert r["dow_target"] == 1 and r["dow_last_demand"] == 1
    assert bool(r["label"]) is True
    assert r["weekdays_since_last_demand"] == 10  # last visible Monday is two weeks back
    assert r["mean_interdemand_interval"] == 5
    assert r["size_skew"] == 0 and r["size_kurtosis"] == 0


def test_horizon_shift_masks_extra_demands():
    s = mondays_only()
    target = MON + dt.timedelta(days=7 * 40)
    r14 = extract_occurrence_features([s], [target], 14)[0].iloc[0]
    r56 = extract_occurrence_features([s], [target], 56)[0].iloc[0]
    # 56 days hide six more Mondays than 14 days, five weekdays apart
    assert r56["weekdays_since_last_demand"] - r14["weekdays_since_last_demand"] == 6 * 5


def test_weekends_dropped_and_early_targets_skipped():
    s = mondays_only(10)
    targets = [MON + dt.timedelta(days=d) for d in (5, 6, 7, 20)]  # Sat, Sun, Mon, Sun
    rows, skipped = extract_occurrence_features([s], targets, 14)
    assert len(rows) == 0 and skipped == 1  # Monday at day 7 has its cut-off before the start


def test_label_missing_past_series_end():
    s = mondays_only(4)
    rows, _ = extract_occurrence_features([s], [MON + dt.timedelta(days=35)], 14)
    assert pd.isna(rows["label"].iloc[0])


def test_shape_moments_match_scipy():
    rng = np.random.default_rng(0)
    sizes = rng.lognormal(2, 0.8, 40).round()
    sk, ku = _shape_moments(sizes)
    for k in range(3, 41):
        if np.ptp(sizes[:k]) > 0:
            assert sk[k] == pytest.approx(skew(sizes[:k]), abs=1e-8)
            assert ku[k] == pytest.approx(kurtosis(sizes[:k]), abs=1e-8)
    assert sk[2] == 0 and ku[2] == 0


def test_feature_order():
    assert feature_columns(False) == OCCURRENCE_FEATURES
    assert feature_columns(True)[-1] == "target_dow_share"


# --- focal loss


def test_focal_gradient_against_finite_differences():
    rng = np.random.default_rng(1)
    z = rng.uniform(-6, 6, 1000)
    y = rng.random(1000) < 0.5
    eps = 1e-5
    for gamma in (0.0, 0.5, 2.0):
        g, h = focal_grad_hess(z, y, gamma)
        fd = (focal_loss(z + eps, y, gamma) - focal_loss(z - eps, y, gamma)) / (2 * eps)
        assert np.allclose(g, fd, rtol=1e-6, atol=1e-9)
        fdh = (focal_grad(z + eps, y, gamma) - focal_grad(z - eps, y, gamma)) / (2 * eps)
        assert np.allclose(h, fdh, rtol=1e-5, atol=1e-8)


def test_gamma_zero_is_logloss():
    z = np.linspace(-8, 8, 101)
    for y in (np.zeros(101, bool), np.ones(101, bool)):
        g, h = focal_grad_hess(z, y, 0.0)
        lg, lh = logloss_grad_hess(z, y)
        assert np.allclose(g, lg, rtol=0, atol=1e-15)
        assert np.allclose(h, lh, rtol=0, atol=1e-15)
        assert np.array_equal(newton_hessian(z, y, 0.0, 0.0)[1], np.maximum(h, (lh)))


def test_newton_hessian_positive():
    z = np.linspace(-20, 20, 401)
    _, h = newton_hessian(z, np.ones_like(z, bool), 2.0)
    assert np.all(h > 0)


# --- boosting


def toy_rows(n=200, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, n)
    return pd.DataFrame({"x": x, "c": rng.integers(0, 3, n), "label": x > 0.1})


def test_separable_data_reaches_auc_one():
    rows = toy_rows()
    m = BoostedClassifier(["x", "c"], ["c"], BoostingParams(n_rounds=50, max_depth=3)).fit(rows)
    assert auc_roc(m.predict_proba(rows), rows["label"]) == 1.0


def test_boosting_determinism_and_round_trip():
    rows = toy_rows(seed=2)
    rows["label"] = rows["label"] ^ (np.random.default_rng(5).random(len(rows)) < 0.1)
    p = BoostingParams(n_rounds=20, max_depth=3, subsample=0.8)
    a = BoostedClassifier(["x", "c"], ["c"], p, seed=4).fit(rows)
    b = BoostedClassifier(["x", "c"], ["c"], p, seed=4).fit(rows)
    assert np.array_equal(a.predict_proba(rows), b.predict_proba(rows))
    c = BoostedClassifier.from_dict(a.to_dict())
    assert np.array_equal(a.predict_proba(rows), c.predict_proba(rows))


def test_boosting_errors():
    rows = toy_rows()
    with pytest.raises(ValueError, match="no negative"):
        BoostedClassifier(["x"], []).fit(rows.assign(label=True))
    m = BoostedClassifier(["x", "c"], ["c"], BoostingParams(n_rounds=2)).fit(rows)
    with pytest.raises(SchemaError, match="c"):
        m.predict_proba(rows[["x"]])
    assert len(predict_occurrence(m, rows.iloc[:0])) == 0


def test_monday_rows_outscore_friday_rows():
    rng = np.random.default_rng(0)
    series = []
    for i in range(6):
        v = np.zeros(7 * 80)
        v[::7] = rng.integers(1, 9, 80)
        v[rng.random(len(v)) < 0.01] += 1  # noise on other days
        series.append(DemandSeries((f"M{i}", "C"), MON, v))
    train = [MON + dt.timedelta(days=d) for d in range(20, 7 * 60)]
    rows, _ = extract_occurrence_features(series, train, 14)
    rows = rows[rows["label"].notna()]
    model = fit_boosted(rows, "global", BoostingParams(n_rounds=30, max_depth=3),
                        features=feature_columns(False))
    test = [MON + dt.timedelta(days=d) for d in range(7 * 60, 7 * 80)]
    trows, _ = extract_occurrence_features(series, test, 14)
    scores = model.predict_proba(trows)
    assert scores[trows["dow_target"] == 1].min() > scores[trows["dow_target"] == 5].max()


def test_per_type_scope_needs_group_column():
    with pytest.raises(SchemaError):
        fit_boosted(toy_rows(), "per_type", features=["x"])


# --- Markov and hybrid network


def test_markov_alternating():
    m = fit_markov([1, 0] * 200)
    assert m.p01 > 0.99 and m.p11 < 0.01
    assert fit_markov([3] * 100).p11 > 0.98


def test_markov_converges_to_stationary():
    m = fit_markov([1, 0, 0, 1, 1, 0, 0, 0, 1, 0, 1, 0, 0])
    for state in (False, True):
        assert m.predict_proba(state, 200) == pytest.approx(m.stationary(), abs=1e-12)
    assert m.predict_proba(True, 0) == 1.0


def test_hybrid_network():
    v = np.tile([0, 0, 4, 0, 0, 0, 5], 30).astype(float)
    a = fit_hybrid_mlp(v, 2, seed=3)
    b = fit_hybrid_mlp(v, 2, seed=3)
    assert np.array_equal(a.w1, b.w1)
    X = hybrid_inputs(v, np.arange(10, 50), np.arange(12, 52))
    flags, out = a.predict(X)
    assert np.array_equal(flags, out > 0)
    # thresholding at zero: strictly positive outputs flag every row
    positive = a.__class__(a.w1, a.b1, np.abs(a.w2) * 0, 1.0, a.x_mean, a.x_std, a.y_scale)
    assert positive.predict(X)[0].all()
