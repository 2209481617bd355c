"""Demand data model: raw records, daily-gridded series and forecast points."""

from __future__ import annotations

import datetime as dt
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class DemandDataError(ValueError):
    """Raised for malformed demand input."""


@dataclass(frozen=True)
class DemandRecord:
    date: dt.date
    material_id: str
    client_id: str
    quantity: float

    def __post_init__(self):
        if not isinstance(self.date, dt.date):
            raise DemandDataError(f"invalid date {self.date!r}")
        if not np.isfinite(self.quantity) or self.quantity < 0:
            raise DemandDataError(
                f"negative or non-finite quantity {self.quantity!r} "
                f"for ({self.material_id}, {self.client_id}) on {self.date}"
            )

    @property
    def key(self) -> tuple[str, str]:
        return (self.material_id, self.client_id)


@dataclass(frozen=True, eq=False)
class DemandSeries:
    """Zero-filled daily demand for one (material, client) pair.

    ``values[i]`` is the demand on ``start_date + i`` days.  The array is
    made read-only on construction so instances can be shared freely.
    """

    key: tuple[str, str]
    start_date: dt.date
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1:
            raise DemandDataError("series values must be one-dimensional")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise DemandDataError(f"series {self.key} has negative or non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)

    def __eq__(self, other):
        if not isinstance(other, DemandSeries):
            return NotImplemented
        return (
            self.key == other.key
            and self.start_date == other.start_date
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self):
        return hash((self.key, self.start_date, len(self.values)))

    @property
    def end_date(self) -> dt.date:
        return self.start_date + dt.timedelta(days=len(self.values) - 1)

    @property
    def dates(self) -> np.ndarray:
        start = np.datetime64(self.start_date, "D")
        return start + np.arange(len(self.values))

    def index_of(self, day: dt.date) -> int:
        return (day - self.start_date).days

    def date_at(self, index: int) -> dt.date:
        return self.start_date + dt.timedelta(days=int(index))

    def truncate(self, last_day: dt.date) -> "DemandSeries":
        """Copy of the series holding only data up to and including ``last_day``."""
        n = max(0, min(len(self.values), self.index_of(last_day) + 1))
        return DemandSeries(self.key, self.start_date, self.values[:n])

    def to_records(self) -> list[DemandRecord]:
        return [
            DemandRecord(self.date_at(i), self.key[0], self.key[1], float(q))
            for i, q in enumerate(self.values)
            if q > 0
        ]


def build_series(
    records: Iterable[DemandRecord], start: dt.date, end: dt.date
) -> list[DemandSeries]:
    """Grid records onto the daily span ``[start, end]``.

    Same-key, same-day quantities are summed and days without records are
    zero.  Series come back sorted by key.
    """
    if end < start:
        raise DemandDataError(f"empty span {start}..{end}")
    n_days = (end - start).days + 1
    buckets: dict[tuple[str, str], np.ndarray] = defaultdict(lambda: np.zeros(n_days))
    for i, rec in enumerate(records):
        if rec.quantity < 0:
            raise DemandDataError(f"record {i}: negative quantity {rec.quantity}")
        offset = (rec.date - start).days
        if not 0 <= offset < n_days:
            raise DemandDataError(f"record {i}: date {rec.date} outside span {start}..{end}")
        buckets[rec.key][offset] += rec.quantity
    return [DemandSeries(key, start, buckets[key]) for key in sorted(buckets)]


def span_of(records: Sequence[DemandRecord]) -> tuple[dt.date, dt.date]:
    if not records:
        raise DemandDataError("no records")
    days = [r.date for r in records]
    return min(days), max(days)


def nonzero_view(series: DemandSeries) -> list[tuple[dt.date, float]]:
    idx = np.flatnonzero(series.values > 0)
    return [(series.date_at(i), float(series.values[i])) for i in idx]


def is_weekday(day) -> bool:
    return bool(np.is_busday(np.datetime64(day, "D")))


def weekday_mask(series: DemandSeries) -> np.ndarray:
    """Boolean mask over ``series.values`` selecting Monday..Friday."""
    return np.is_busday(series.dates)


def weekdays_between(start: dt.date, end: dt.date) -> list[dt.date]:
    """Weekdays in the closed interval ``[start, end]``."""
    days = np.arange(np.datetime64(start, "D"), np.datetime64(end, "D") + 1)
    return [d.astype(object) for d in days[np.is_busday(days)]]


@dataclass(frozen=True)
class ForecastPoint:
    date: dt.date
    occurrence_score: float
    occurrence_flag: bool
    size_estimate: float
    combined: float
    raw_score: bool = False  # score is not a probability (e.g. MLP output)

    @classmethod
    def compose(cls, date, score, flag, size, raw_score=False) -> "ForecastPoint":
        size = float(max(size, 0.0))
        return cls(date, float(score), bool(flag), size, size if flag else 0.0, raw_score)


@dataclass(frozen=True, eq=False)
class SeriesForecast:
    """Column-oriented forecast for one series over a set of target dates.

    Two-fold forecasts are built with :meth:`from_parts`, which fixes
    ``combined = size * flag``.  Reference methods issue a point forecast
    on every date whatever their flag; :meth:`point_forecast` keeps it.
    """

    key: tuple[str, str]
    dates: np.ndarray  # datetime64[D]
    score: np.ndarray
    flag: np.ndarray
    size: np.ndarray
    combined: np.ndarray
    raw_score: bool = False

    @classmethod
    def from_parts(cls, key, dates, score, flag, size, raw_score=False) -> "SeriesForecast":
        dates = np.asarray(dates, dtype="datetime64[D]")
        score = np.asarray(score, dtype=float)
        flag = np.asarray(flag, dtype=bool)
        size = np.maximum(np.asarray(size, dtype=float), 0.0)
        if not (len(dates) == len(score) == len(flag) == len(size)):
            raise ValueError("forecast columns must have equal length")
        return cls(key, dates, score, flag, size, np.where(flag, size, 0.0), raw_score)

    @classmethod
    def point_forecast(cls, key, dates, score, flag, forecast, raw_score=False) -> "SeriesForecast":
        dates = np.asarray(dates, dtype="datetime64[D]")
        score = np.asarray(score, dtype=float)
        flag = np.asarray(flag, dtype=bool)
        forecast = np.maximum(np.asarray(forecast, dtype=float), 0.0)
        if not (len(dates) == len(score) == len(flag) == len(forecast)):
            raise ValueError("forecast columns must have equal length")
        return cls(key, dates, score, flag, forecast, forecast.copy(), raw_score)

    def __len__(self):
        return len(self.dates)

    def points(self) -> list[ForecastPoint]:
        return [
            ForecastPoint(d.astype(object), float(s), bool(f), float(z), float(c), self.raw_score)
            for d, s, f, z, c in zip(self.dates, self.score, self.flag, self.size, self.combined)
        ]

    def concat(self, other: "SeriesForecast") -> "SeriesForecast":
        if other.key != self.key:
            raise ValueError("cannot concatenate forecasts of different series")
        cols = [np.concatenate([getattr(self, c), getattr(other, c)])
                for c in ("dates", "score", "flag", "size", "combined")]
        return SeriesForecast(self.key, *cols, self.raw_score or other.raw_score)
