"""Aggregate-forecast-disaggregate (ADIDA) wrapper."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .core import DemandSeries
from .forecasters import DEFAULT_ALPHA, exponential_smoothing

Forecaster = Callable[[np.ndarray], float]


def ses_inner(alpha: float = DEFAULT_ALPHA) -> Forecaster:
    def forecast(values: np.ndarray) -> float:
        return exponential_smoothing(values, alpha)
    forecast.__name__ = f"ses(alpha={alpha})"
    return forecast


@dataclass(frozen=True)
class AggregationPlan:
    bucket_length: int
    mode: str = "non-overlapping"
    inner_forecaster: Forecaster = field(default_factory=ses_inner)

    def __post_init__(self):
        if int(self.bucket_length) != self.bucket_length or self.bucket_length < 1:
            raise ValueError(f"bucket_length must be a positive integer, got {self.bucket_length}")
        if self.mode not in ("non-overlapping", "overlapping"):
            raise ValueError(f"unknown aggregation mode {self.mode!r}")


def default_bucket_length(values) -> int:
    """Mean inter-demand interval, rounded up; 1 for dense or empty series."""
    y = _values(values)
    idx = np.flatnonzero(y > 0)
    if len(idx) < 2:
        return 1
    return max(1, math.ceil(float(np.mean(np.diff(idx)))))


def _values(series) -> np.ndarray:
    if isinstance(series, DemandSeries):
        return series.values
    return np.asarray(series, dtype=float)


def aggregate(series, plan: AggregationPlan) -> np.ndarray:
    """Bucket sums.  Non-overlapping buckets end at the last period and
    an incomplete head is dropped; overlapping buckets slide by one."""
    y = _values(series)
    b = int(plan.bucket_length)
    if len(y) < b:
        raise ValueError(f"series of length {len(y)} is shorter than one bucket ({b})")
    if plan.mode == "overlapping":
        c = np.concatenate([[0.0], np.cumsum(y)])
        return c[b:] - c[:-b]
    n_buckets = len(y) // b
    tail = y[len(y) - n_buckets * b:]
    return tail.reshape(n_buckets, b).sum(axis=1)


def split_evenly(total: float, parts: int) -> np.ndarray:
    """``parts`` near-equal shares whose exact (rational) sum is ``total``.

    All shares are ``total/parts`` except the last, which absorbs the
    rounding remainder.
    """
    share = total / parts
    out = np.full(parts, share)
    for _ in range(64):
        rest = Fraction(total) - (parts - 1) * Fraction(share)
        last = float(rest)
        if Fraction(last) == rest:
            out[:-1] = share
            out[-1] = last
            return out
        share = math.nextafter(share, -math.inf)
    raise ArithmeticError(f"could not split {total!r} into {parts} exact shares")


def adida_forecast(series, plan: AggregationPlan, horizon_days: int) -> np.ndarray:
    """Daily forecast for the next ``horizon_days`` periods.

    The inner forecaster predicts the next aggregate bucket; that value is
    spread equally over the bucket's days and the pattern repeats.
    """
    if horizon_days < 0:
        raise ValueError("horizon_days must be non-negative")
    agg = aggregate(series, plan)
    bucket_forecast = max(0.0, float(plan.inner_forecaster(agg)))
    daily = split_evenly(bucket_forecast, plan.bucket_length)
    reps = -(-horizon_days // plan.bucket_length)
    return np.tile(daily, max(reps, 0))[:horizon_days]
