import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twofold.taxonomy import (
    Quadrant,
    Schema2,
    UndefinedPatternError,
    adi,
    classify,
    cv2,
    profile_from_stats,
)

from conftest import series_of


def test_adi_examples():
    assert adi(series_of(np.ones(10))) == 1.0
    v = np.zeros(12)
    v[[1, 5, 9]] = 2
    assert adi(series_of(v)) == 4.0


def test_adi_weekday_grid_maximum():
    # 365 days from a Monday hold 261 weekdays; one demand gives ADI 261
    v = np.zeros(365)
    v[2] = 4
    assert adi(series_of(v), weekdays_only=True) == 261.0


def test_cv2_examples():
    assert cv2(series_of([5, 0, 5, 5])) == 0.0
    assert cv2(series_of([2, 0, 4])) == pytest.approx(1 / 9, abs=1e-15)
    assert cv2(series_of([0, 7, 0])) == 0.0


def test_all_zero_is_undefined():
    with pytest.raises(UndefinedPatternError):
        adi(series_of(np.zeros(5)))
    with pytest.raises(UndefinedPatternError):
        cv2(series_of(np.zeros(5)))
    with pytest.raises(UndefinedPatternError):
        classify(series_of(np.zeros(5)))


@pytest.mark.parametrize("a,c,quad,schema", [
    (37.29, 1.10, Quadrant.LUMPY, Schema2.C_PLUS_R),
    (25.26, 0.05, Quadrant.INTERMITTENT, Schema2.C_PLUS_R),
    (1.0, 0.0, Quadrant.SMOOTH, Schema2.R),
    (1.0, 0.8, Quadrant.ERRATIC, Schema2.R),
    (1.32, 0.49, Quadrant.LUMPY, Schema2.C_PLUS_R),  # cut-offs are inclusive
])
def test_quadrants(a, c, quad, schema):
    p = profile_from_stats(a, c)
    assert p.quadrant == quad and p.schema2 == schema


series_values = st.lists(st.integers(0, 30), min_size=2, max_size=60).filter(lambda v: any(v))


@settings(max_examples=80, deadline=None)
@given(series_values, st.floats(0.1, 50))
def test_scale_invariance(values, k):
    a = classify(series_of(values))
    b = classify(series_of(np.asarray(values, float) * k))
    assert a.adi == b.adi
    assert b.cv2 == pytest.approx(a.cv2, rel=1e-9, abs=1e-12)
    assert a.schema2 == b.schema2
    assert (a.quadrant in (Quadrant.INTERMITTENT, Quadrant.LUMPY)) == (a.schema2 == Schema2.C_PLUS_R)


@settings(max_examples=60, deadline=None)
@given(series_values, st.randoms(use_true_random=False))
def test_adi_permutation_invariant(values, rnd):
    shuffled = list(values)
    rnd.shuffle(shuffled)
    assert adi(series_of(values)) == adi(series_of(shuffled))
