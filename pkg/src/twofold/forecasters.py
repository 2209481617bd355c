"""Classical intermittent-demand forecasters.

Two flavours live here.  The size estimators (naive, MA(3), MFV, SES, RAND)
work on the history of nonzero demand sizes and return one number.  The
Croston family (Croston, SBA, TSB) runs a recursion over the full
zero-including series; their ``*Filter`` classes keep the state after every
period so a forecast made at any cut-off can be read back without peeking
at later data.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import DemandSeries

DEFAULT_ALPHA = 0.1
DEFAULT_BETA = 0.1


class NoForecastError(ValueError):
    """Not enough history to produce a forecast."""


class NotFittedError(RuntimeError):
    pass


def _sizes(history) -> np.ndarray:
    if isinstance(history, DemandSeries):
        history = history.values
    h = np.asarray(history, dtype=float)
    return h[h > 0]


def _require(sizes: np.ndarray, name: str) -> None:
    if len(sizes) == 0:
        raise NoForecastError(f"{name}: empty demand history")


def naive_last(history) -> float:
    sizes = _sizes(history)
    _require(sizes, "naive")
    return float(sizes[-1])


def ma3(history, window: int = 3) -> float:
    sizes = _sizes(history)
    _require(sizes, "ma3")
    return float(np.mean(sizes[-window:]))


def mfv(history) -> float:
    """Most frequent nonzero size; ties go to the smallest value."""
    sizes = _sizes(history)
    _require(sizes, "mfv")
    counts = Counter(sizes.tolist())
    top = max(counts.values())
    return float(min(v for v, c in counts.items() if c == top))


def exponential_smoothing(values, alpha: float) -> float:
    """Plain SES recursion seeded with the first value."""
    values = np.asarray(values, dtype=float)
    if len(values) == 0:
        raise NoForecastError("exponential smoothing of an empty sequence")
    level = values[0]
    for v in values[1:]:
        level = alpha * v + (1 - alpha) * level
    return float(level)


def ses(history, alpha: float = DEFAULT_ALPHA) -> float:
    """Exponential smoothing over the nonzero demand sizes only."""
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    sizes = _sizes(history)
    _require(sizes, "ses")
    return exponential_smoothing(sizes, alpha)


def jitter(x: float, z: float) -> float:
    j = 1 + round(x + z * np.sqrt(x))
    return float(j) if j > 0 else float(x)


def rand_jitter(history, rng_seed=None, *, rng: Optional[np.random.Generator] = None,
                z: Optional[float] = None) -> float:
    """Resample a past size and jitter it: ``1 + round(X + Z*sqrt(X))``.

    Falls back to the sampled value when the jittered one is not positive.
    ``z`` pins the normal deviate (for testing).
    """
    sizes = _sizes(history)
    _require(sizes, "rand")
    if rng is None:
        rng = np.random.default_rng(rng_seed)
    x = float(sizes[rng.integers(len(sizes))])
    if z is None:
        z = float(rng.standard_normal())
    return jitter(x, z)


# --- Croston family -------------------------------------------------------


@dataclass(frozen=True)
class SmoothingState:
    level: float
    periodicity_or_prob: float
    forecast: float
    alpha: float
    beta: Optional[float] = None


class _Filter:
    """Common bookkeeping: per-period forecasts and implied occurrence scores."""

    forecast_: np.ndarray
    score_: np.ndarray

    def _check(self):
        if not hasattr(self, "forecast_"):
            raise NotFittedError(f"{type(self).__name__} is not fitted")

    def forecast_at(self, index: int) -> float:
        """Forecast issued after observing periods ``0..index``."""
        self._check()
        if index < 0:
            return 0.0
        return float(self.forecast_[index])

    def score_at(self, index: int) -> float:
        self._check()
        if index < 0:
            return 0.0
        return float(self.score_[index])

    @property
    def final_forecast(self) -> float:
        self._check()
        return float(self.forecast_[-1])


class CrostonFilter(_Filter):
    """Croston recursion run period by period.

    Level ``a`` and interval ``p`` start at the first demand (``a`` = size,
    ``p`` = 1, or the gap from the series start when ``init="first_gap"``)
    and change only in demand periods.  ``printed_variant`` multiplies the
    interval update by the demand size, as the equation is sometimes
    typeset; it is kept for comparison only.
    """

    def __init__(self, alpha: float = DEFAULT_ALPHA, init: str = "unit",
                 printed_variant: bool = False):
        if not 0 < alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
        if init not in ("unit", "first_gap"):
            raise ValueError(f"unknown init {init!r}")
        self.alpha = alpha
        self.init = init
        self.printed_variant = printed_variant

    def fit(self, values) -> "CrostonFilter":
        y = _raw(values)
        n = len(y)
        level = np.full(n, np.nan)
        interval = np.full(n, np.nan)
        a = p = np.nan
        last = -1
        alpha = self.alpha
        for t in range(n):
            d = y[t]
            if d > 0:
                if last < 0:
                    a = d
                    p = 1.0 if self.init == "unit" else float(t + 1)
                else:
                    q = t - last
                    a = alpha * d + (1 - alpha) * a
                    if self.printed_variant:
                        p = alpha * q * d + (1 - alpha) * p
                    else:
                        p = alpha * q + (1 - alpha) * p
                last = t
            level[t] = a
            interval[t] = p
        seen = ~np.isnan(level)
        self.level_ = level
        self.interval_ = interval
        self.forecast_ = np.where(seen, level / np.where(seen, interval, 1.0), 0.0)
        self.score_ = np.where(seen, 1.0 / np.where(seen, interval, 1.0), 0.0)
        return self

    def state_at(self, index: int) -> SmoothingState:
        self._check()
        return SmoothingState(float(self.level_[index]), float(self.interval_[index]),
                              float(self.forecast_[index]), self.alpha)


class SBAFilter(CrostonFilter):
    """Croston scaled by ``1 - alpha/2``."""

    def fit(self, values) -> "SBAFilter":
        super().fit(values)
        self.forecast_ = (1 - self.alpha / 2) * self.forecast_
        return self


class TSBFilter(_Filter):
    """Teunter-Syntetos-Babai: level updated on demand, probability every period.

    ``p0`` is the starting occurrence probability; when omitted it is the
    demand frequency of ``values`` itself, so callers that need a
    leakage-free start should pass the frequency of a training prefix.
    """

    def __init__(self, alpha: float = DEFAULT_ALPHA, beta: float = DEFAULT_BETA,
                 p0: Optional[float] = None, printed_variant: bool = False):
        for name, v in (("alpha", alpha), ("beta", beta)):
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        self.alpha = alpha
        self.beta = beta
        self.p0 = p0
        self.printed_variant = printed_variant

    def fit(self, values) -> "TSBFilter":
        y = _raw(values)
        n = len(y)
        p = self.p0 if self.p0 is not None else (float(np.mean(y > 0)) if n else 0.0)
        if not 0 <= p <= 1:
            raise ValueError(f"p0 must lie in [0, 1], got {p}")
        a = 0.0
        seen = False
        last = -1
        alpha, beta = self.alpha, self.beta
        level = np.empty(n)
        prob = np.empty(n)
        for t in range(n):
            d = y[t]
            if d > 0:
                a = d if not seen else alpha * d + (1 - alpha) * a
                seen = True
                if self.printed_variant:
                    q = t - last if last >= 0 else t + 1
                    p = beta * q * d + (1 - beta) * p
                else:
                    p = beta + (1 - beta) * p
                last = t
            else:
                p = (1 - beta) * p
            level[t] = a
            prob[t] = p
        self.level_ = level
        self.prob_ = prob
        self.forecast_ = level * prob
        self.score_ = prob.copy()
        return self

    def state_at(self, index: int) -> SmoothingState:
        self._check()
        return SmoothingState(float(self.level_[index]), float(self.prob_[index]),
                              float(self.forecast_[index]), self.alpha, self.beta)


class FrequencyFilter(_Filter):
    """Running demand frequency; the implied occurrence score of the
    naive-family size estimators, which carry no occurrence model."""

    def fit(self, values) -> "FrequencyFilter":
        y = _raw(values)
        counts = np.cumsum(y > 0)
        self.score_ = counts / np.arange(1, len(y) + 1)
        self.forecast_ = self.score_.copy()
        return self


def _raw(values) -> np.ndarray:
    if isinstance(values, DemandSeries):
        values = values.values
    y = np.asarray(values, dtype=float)
    if np.any(y < 0):
        raise ValueError("demand must be non-negative")
    return y


def croston(series, alpha: float = DEFAULT_ALPHA, **kwargs) -> float:
    """Flat Croston forecast after the last period of ``series``."""
    f = CrostonFilter(alpha, **kwargs).fit(series)
    if len(f.level_) == 0 or np.isnan(f.level_[-1]):
        raise NoForecastError("croston: series has no demand")
    return f.final_forecast


def sba(series, alpha: float = DEFAULT_ALPHA, **kwargs) -> float:
    return (1 - alpha / 2) * croston(series, alpha, **kwargs)


def tsb(series, alpha: float = DEFAULT_ALPHA, beta: float = DEFAULT_BETA, **kwargs) -> float:
    if len(_raw(series)) == 0:
        raise NoForecastError("tsb: empty series")
    return TSBFilter(alpha, beta, **kwargs).fit(series).final_forecast


_FILTERS = {
    "croston": CrostonFilter,
    "sba": SBAFilter,
    "tsb": TSBFilter,
    "frequency": FrequencyFilter,
}


def implied_occurrence_score(method, series=None, index: Optional[int] = None) -> float:
    """Occurrence belief implied by a Croston-family method.

    ``method`` is either a fitted filter or a method name (then ``series``
    is fitted on the spot).  Croston/SBA give ``1/p``, TSB its current
    probability, the naive family the running demand frequency.
    """
    if isinstance(method, str):
        name = method.lower()
        if name in ("naive", "ma3", "mfv", "ses", "rand"):
            name = "frequency"
        if name not in _FILTERS:
            raise ValueError(f"no implied occurrence score for {method!r}")
        if series is None:
            raise NotFittedError(f"{method} has no data to fit")
        method = _FILTERS[name]().fit(series)
    if index is None:
        method._check()
        index = len(method.score_) - 1
    return method.score_at(index)
