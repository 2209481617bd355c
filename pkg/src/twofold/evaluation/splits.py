"""Rolling-origin folds over the final months of the data."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np
import pandas as pd

VALIDATION_DAYS = 30  # inner-loop window at the end of each training segment


@dataclass(frozen=True)
class Fold:
    index: int
    start: dt.date  # first test day
    end: dt.date  # last test day (inclusive)
    train_end: dt.date  # first day NOT available for fitting

    def test_weekdays(self) -> np.ndarray:
        days = np.arange(np.datetime64(self.start, "D"), np.datetime64(self.end, "D") + 1)
        return days[np.is_busday(days)]

    def validation_weekdays(self, days: int = VALIDATION_DAYS) -> np.ndarray:
        end = np.datetime64(self.train_end, "D")
        span = np.arange(end - days, end)
        return span[np.is_busday(span)]


@dataclass(frozen=True)
class SplitPlan:
    """``n_folds`` consecutive windows of ``fold_months`` ending at ``data_end``.

    Each fold may fit on data strictly before ``fold.start - horizon``.
    """

    data_start: dt.date
    data_end: dt.date
    horizon_days: int = 14
    test_months: int = 6
    n_folds: int = 6

    def __post_init__(self):
        if self.horizon_days < 1:
            raise ValueError("horizon_days must be positive")
        if self.n_folds < 1 or self.test_months < 1:
            raise ValueError("need at least one fold and one test month")
        if self.data_start >= self.test_start - dt.timedelta(days=self.horizon_days):
            raise ValueError("data does not cover a training segment before the first fold")

    @property
    def test_start(self) -> dt.date:
        end = pd.Timestamp(self.data_end) + pd.Timedelta(days=1)
        return (end - pd.DateOffset(months=self.test_months)).date()

    def folds(self) -> list[Fold]:
        """Chronological folds; boundaries fall on month offsets when the
        fold count equals the month count, otherwise on equal day splits."""
        start = pd.Timestamp(self.test_start)
        stop = pd.Timestamp(self.data_end) + pd.Timedelta(days=1)
        if self.n_folds == self.test_months:
            edges = [start + pd.DateOffset(months=k) for k in range(self.n_folds)] + [stop]
        else:
            span = (stop - start).days
            edges = [start + pd.Timedelta(days=span * k // self.n_folds) for k in range(self.n_folds + 1)]
        out = []
        for k in range(self.n_folds):
            fold_start = edges[k].date()
            fold_end = (edges[k + 1] - pd.Timedelta(days=1)).date()
            out.append(Fold(k, fold_start, fold_end, fold_start - dt.timedelta(days=self.horizon_days)))
        return out

    def check(self) -> None:
        """Raise if any fold lets training data reach within the horizon of a test day."""
        for fold in self.folds():
            newest_train = np.datetime64(fold.train_end, "D") - 1
            first_test = np.datetime64(fold.start, "D")
            if newest_train + self.horizon_days > first_test:
                raise ValueError(f"fold {fold.index}: training overlaps the horizon")
