import datetime as dt
import sys

import numpy as np
import pytest

from twofold.core import DemandSeries
from twofold.evaluation.synthetic import SyntheticSpec, generate_synthetic

START = dt.date(2020, 1, 6)  # a Monday


def series_of(values, key=("A", "X"), start=START):
    return DemandSeries(key, start, np.asarray(values, dtype=float))


@pytest.fixture(scope="session")
def small_synthetic():
    """40 series over ~2 years; fast enough for pipeline tests."""
    return generate_synthetic(SyntheticSpec(n_series=40, span_days=700, seed=3))


@pytest.fixture(scope="session")
def fast_params():
    from twofold.occurrence import BoostingParams
    from twofold.size import EnsembleParams

    return BoostingParams(n_rounds=40, max_depth=4), EnsembleParams(n_trees=20, max_depth=8)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
