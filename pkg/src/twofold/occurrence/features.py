"""Occurrence features for (series, target date) pairs.

Every feature for target date ``t`` is computed from data dated on or
before ``t - horizon_days``; the label is the only thing read at ``t``.
"""

from __future__ import annotations

import datetime as dt
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from ..core import DemandSeries

# Contractual features, in model column order.
OCCURRENCE_FEATURES = [
    "weekdays_since_last_demand",
    "dow_last_demand",
    "dow_target",
    "mean_interdemand_interval",
    "mean_recent_intervals_global",
    "size_skew",
    "size_kurtosis",
]
# Invented helper feature (outside the contractual list): share of past
# demands that fell on the target's day of week.
EXTRA_OCCURRENCE_FEATURES = ["target_dow_share"]
CATEGORICAL_FEATURES = ["dow_last_demand", "dow_target"]
NO_DEMAND_DOW = 0  # category for "no demand seen yet"; weekdays are ISO 1..7


def _days(values: Iterable) -> np.ndarray:
    return np.asarray([np.datetime64(v, "D") for v in values], dtype="datetime64[D]")


def _shape_moments(sizes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Skew and excess kurtosis of ``sizes[:k]`` for every k = 0..len.

    Population moments from prefix power sums.  Values are shifted by the
    first size, so each prefix result depends only on that prefix.
    """
    n = len(sizes)
    skew = np.zeros(n + 1)
    kurt = np.zeros(n + 1)
    if n < 3:
        return skew, kurt
    d = np.asarray(sizes, dtype=float) - sizes[0]
    k = np.arange(1, n + 1, dtype=float)
    s1, s2, s3, s4 = (np.cumsum(d ** p) / k for p in (1, 2, 3, 4))
    m2 = s2 - s1 ** 2
    m3 = s3 - 3 * s1 * s2 + 2 * s1 ** 3
    m4 = s4 - 4 * s1 * s3 + 6 * s1 ** 2 * s2 - 3 * s1 ** 4
    varied = (np.cumsum(d != 0) > 0) & (k >= 3) & (m2 > 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        skew[1:] = np.where(varied, m3 / m2 ** 1.5, 0.0)
        kurt[1:] = np.where(varied, m4 / m2 ** 2 - 3.0, 0.0)
    return skew, kurt


def _last_gap_on_grid(series: DemandSeries, grid_start: np.datetime64, n_grid: int) -> np.ndarray:
    """Weekday gap between the last two demands visible on each grid day (NaN if < 2)."""
    out = np.full(n_grid, np.nan)
    demand_days = series.dates[series.values > 0]
    if len(demand_days) < 2:
        return out
    gaps = np.busday_count(demand_days[:-1], demand_days[1:]).astype(float)
    # gap j becomes visible on demand_days[j+1]
    offsets = (demand_days[1:] - grid_start).astype(int)
    for j, off in enumerate(offsets):
        if off < n_grid:
            out[max(off, 0):] = gaps[j]
    return out


def global_recent_interval(series_set: Sequence[DemandSeries]):
    """Cross-series mean of the most recent inter-demand gap, per calendar day.

    Returns ``(grid_start, values)`` where ``values[i]`` is the mean over
    series with at least two visible demands on ``grid_start + i``.
    """
    if not series_set:
        return np.datetime64("1970-01-01", "D"), np.zeros(0)
    start = min(np.datetime64(s.start_date, "D") for s in series_set)
    end = max(np.datetime64(s.end_date, "D") for s in series_set)
    n = int((end - start).astype(int)) + 1
    total = np.zeros(n)
    count = np.zeros(n)
    for s in series_set:
        g = _last_gap_on_grid(s, start, n)
        ok = ~np.isnan(g)
        total[ok] += g[ok]
        count[ok] += 1
    with np.errstate(invalid="ignore"):
        mean = np.where(count > 0, total / np.maximum(count, 1), np.nan)
    return start, mean


def series_occurrence_features(
    series: DemandSeries,
    target_dates: Sequence,
    horizon_days: int,
    global_interval: tuple[np.datetime64, np.ndarray] | None = None,
) -> tuple[pd.DataFrame, int]:
    """Feature rows for one series; returns ``(frame, n_skipped)``.

    Targets on weekends are dropped.  Targets whose cut-off falls before
    the series start are skipped and counted.  Targets past the end of the
    series get a missing label.
    """
    targets = _days(target_dates)
    targets = targets[np.is_busday(targets)]
    start = np.datetime64(series.start_date, "D")
    cutoff = targets - np.timedelta64(int(horizon_days), "D")
    keep = cutoff >= start
    n_skipped = int(np.count_nonzero(~keep))
    targets, cutoff = targets[keep], cutoff[keep]
    if global_interval is None:
        global_interval = global_recent_interval([series])

    values = series.values
    n = len(values)
    demand_idx = np.flatnonzero(values > 0)
    demand_days = start + demand_idx
    sizes = values[demand_idx]
    cut_idx = (cutoff - start).astype(int)
    # number of demands visible at each cut-off
    k = np.searchsorted(demand_idx, cut_idx, side="right")

    has = k > 0
    last_day = np.where(has, demand_days[np.maximum(k - 1, 0)] if len(demand_days) else start, start)
    since_last = np.busday_count(last_day, targets)

    dow_target = (targets.astype("datetime64[D]").view("int64") - 4) % 7 + 1
    dow_last = np.where(has, (last_day.view("int64") - 4) % 7 + 1, NO_DEMAND_DOW)

    # mean weekday gap between consecutive visible demands
    if len(demand_days) >= 2:
        gaps = np.busday_count(demand_days[:-1], demand_days[1:]).astype(float)
        cum_gaps = np.concatenate([[0.0], np.cumsum(gaps)])
    else:
        cum_gaps = np.zeros(max(len(demand_days), 1))
    visible_weekdays = np.busday_count(start, cutoff + 1).astype(float)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean_gap = np.where(
            k >= 2,
            cum_gaps[np.maximum(k - 1, 0)] / np.maximum(k - 1, 1),
            visible_weekdays / np.maximum(k, 1),
        )

    g_start, g_values = global_interval
    g_off = (cutoff - g_start).astype(int)
    in_grid = (g_off >= 0) & (g_off < len(g_values))
    recent_global = np.full(len(targets), np.nan)
    recent_global[in_grid] = g_values[g_off[in_grid]]
    recent_global = np.where(np.isnan(recent_global), mean_gap, recent_global)

    skew, kurt = _shape_moments(sizes)

    # share of visible demands on each day of week: cumulative counts per dow
    demand_dow = (demand_days.view("int64") - 4) % 7 + 1 if len(demand_days) else np.zeros(0, int)
    dow_counts = np.zeros((len(demand_days) + 1, 8))
    if len(demand_days):
        onehot = np.zeros((len(demand_days), 8))
        onehot[np.arange(len(demand_days)), demand_dow] = 1
        dow_counts[1:] = np.cumsum(onehot, axis=0)
    share = np.where(has, dow_counts[k, dow_target] / np.maximum(k, 1), 0.0)

    t_idx = (targets - start).astype(int)
    known = t_idx < n
    label = pd.arrays.BooleanArray(
        np.where(known, values[np.clip(t_idx, 0, max(n - 1, 0))] > 0 if n else False, False), ~known
    )

    frame = pd.DataFrame(
        {
            "material_id": series.key[0],
            "client_id": series.key[1],
            "date": targets,
            "weekdays_since_last_demand": since_last.astype(int),
            "dow_last_demand": dow_last.astype(int),
            "dow_target": dow_target.astype(int),
            "mean_interdemand_interval": mean_gap,
            "mean_recent_intervals_global": recent_global,
            "size_skew": skew[k],
            "size_kurtosis": kurt[k],
            "target_dow_share": share,
            "label": label,
        }
    )
    return frame, n_skipped


def extract_occurrence_features(
    series_set: Sequence[DemandSeries],
    target_dates,
    horizon_days: int,
) -> tuple[pd.DataFrame, int]:
    """Rows for every (series, weekday target) pair across ``series_set``.

    ``target_dates`` is either one sequence shared by every series or a
    mapping from series key to its own dates.  Returns the stacked frame
    and the number of skipped targets.
    """
    g = global_recent_interval(series_set)
    frames, skipped = [], 0
    for s in series_set:
        dates = target_dates[s.key] if isinstance(target_dates, dict) else target_dates
        frame, n_skip = series_occurrence_features(s, dates, horizon_days, g)
        frames.append(frame)
        skipped += n_skip
    if not frames:
        return empty_occurrence_frame(), skipped
    return pd.concat(frames, ignore_index=True), skipped


def empty_occurrence_frame() -> pd.DataFrame:
    cols = ["material_id", "client_id", "date", *OCCURRENCE_FEATURES, *EXTRA_OCCURRENCE_FEATURES, "label"]
    return pd.DataFrame({c: [] for c in cols})


def feature_columns(include_extra: bool = True) -> list[str]:
    return OCCURRENCE_FEATURES + (EXTRA_OCCURRENCE_FEATURES if include_extra else [])


def to_date(value) -> dt.date:
    return np.datetime64(value, "D").astype(object)
