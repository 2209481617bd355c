"""Synthetic intermittent demand with planted day-of-week and interval
structure, plus the oracle occurrence labels."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np
import pandas as pd

from ..core import DemandSeries
from ..taxonomy import CV2_CUTOFF


@dataclass(frozen=True)
class SyntheticSpec:
    n_series: int = 516
    span_days: int = 3 * 365
    start_date: dt.date = dt.date(2019, 1, 7)
    lumpy_fraction: float = 0.095
    adi_range: tuple[float, float] = (6.0, 150.0)  # weekdays per demand, log-uniform
    # CV2 targets: lognormal (median, log-sd) truncated to a range; defaults
    # follow typical quartiles of intermittent and lumpy groups
    intermittent_cv2: tuple[float, float] = (0.05, 1.39)
    intermittent_cv2_range: tuple[float, float] = (0.005, 0.45)
    lumpy_cv2: tuple[float, float] = (1.10, 0.74)
    lumpy_cv2_range: tuple[float, float] = (0.55, 4.8)
    mean_size_range: tuple[float, float] = (5.0, 200.0)
    two_day_fraction: float = 0.2  # series admitting demand on two weekdays
    regularity: float = 0.5  # deterministic share of each gap
    adi_tolerance: float = 0.2
    max_attempts: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.n_series < 0 or self.span_days < 14:
            raise ValueError("need n_series >= 0 and span_days >= 14")
        lo, hi = self.adi_range
        if not 1 <= lo <= hi:  # ADI 1 means demand on every weekday
            raise ValueError(f"ADI targets must satisfy 1 <= low <= high, got {self.adi_range}")
        if not 0 <= self.lumpy_fraction <= 1 or not 0 <= self.two_day_fraction <= 1:
            raise ValueError("fractions must lie in [0, 1]")
        if not 0 <= self.regularity < 1:
            raise ValueError("regularity must lie in [0, 1)")
        for lo_c, hi_c in (self.intermittent_cv2_range, self.lumpy_cv2_range):
            if not 0 <= lo_c <= hi_c:
                raise ValueError("CV2 ranges must be non-negative and ordered")
        if self.intermittent_cv2_range[1] >= 0.49 or self.lumpy_cv2_range[0] < 0.49:
            raise ValueError("CV2 ranges must sit on their side of the 0.49 cut-off")
        if self.mean_size_range[0] < 1:
            raise ValueError("mean sizes must be at least 1")


@dataclass
class SyntheticData:
    series: list[DemandSeries]
    labels: pd.DataFrame  # date, material, client, occurrence (every weekday)
    params: pd.DataFrame  # one row per series: targets, realized statistics, planted weekdays


def _log_uniform(rng, lo, hi):
    return float(np.exp(rng.uniform(np.log(lo), np.log(hi)))) if hi > lo else float(lo)


def _sizes(rng, n: int, mean: float, cv2: float) -> np.ndarray:
    if cv2 == 0:
        return np.full(n, float(round(mean)))
    s2 = np.log1p(cv2)
    x = rng.lognormal(np.log(mean) - s2 / 2, np.sqrt(s2), n)
    return np.maximum(1.0, np.round(x))


def _occurrence(rng, slots: int, mean_gap: float, regularity: float) -> np.ndarray:
    """Slot indices of demand: gaps are a fixed part plus a geometric part."""
    fixed = max(1, int(np.floor(regularity * mean_gap)))
    p = 1.0 / (mean_gap - fixed + 1)
    out = []
    pos = int(rng.integers(0, max(1, int(np.ceil(mean_gap)))))
    while pos < slots:
        out.append(pos)
        pos += fixed + int(rng.geometric(p)) - 1
    return np.asarray(out, dtype=int)


def _realized_cv2(sizes: np.ndarray) -> float:
    return float(np.var(sizes) / np.mean(sizes) ** 2)


def generate_synthetic(spec: SyntheticSpec = SyntheticSpec()) -> SyntheticData:
    """Reproducible series set under ``spec.seed``.

    Each series draws demand only on its admitted weekdays, with gaps of
    at least ``regularity * mean gap`` admitted slots.  Series are redrawn
    until the weekday-grid ADI is within ``adi_tolerance`` of its target
    and the realized CV2 falls on the planted side of the lumpy cut-off.
    """
    start = np.datetime64(spec.start_date, "D")
    days = start + np.arange(spec.span_days)
    weekday = np.is_busday(days)
    n_weekdays = int(weekday.sum())
    dow = (days.view("int64") - 4) % 7 + 1

    children = np.random.SeedSequence(spec.seed).spawn(spec.n_series)
    series, params, label_frames = [], [], []
    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        lumpy = bool(rng.random() < spec.lumpy_fraction)
        target_adi = _log_uniform(rng, *spec.adi_range)
        median, log_sd = spec.lumpy_cv2 if lumpy else spec.intermittent_cv2
        cv_lo, cv_hi = spec.lumpy_cv2_range if lumpy else spec.intermittent_cv2_range
        target_cv2 = float(np.clip(median * np.exp(log_sd * rng.standard_normal()), cv_lo, cv_hi))
        mean_size = _log_uniform(rng, *spec.mean_size_range)
        n_days = 2 if rng.random() < spec.two_day_fraction else 1
        n_days = min(5, max(n_days, int(np.ceil(5 / target_adi))))  # low ADI needs more admitted days
        admitted = np.sort(rng.choice(np.arange(1, 6), n_days, replace=False))
        slot_days = np.flatnonzero(np.isin(dow, admitted))
        mean_gap = target_adi * n_days / 5
        if mean_gap < 1:
            raise ValueError(f"ADI {target_adi:.2f} infeasible with {n_days} admitted weekday(s)")

        for _ in range(spec.max_attempts):
            occ = _occurrence(rng, len(slot_days), mean_gap, spec.regularity)
            if len(occ) < 2:
                continue
            adi = n_weekdays / len(occ)
            if abs(adi - target_adi) > spec.adi_tolerance * target_adi:
                continue
            sizes = _sizes(rng, len(occ), mean_size, target_cv2)
            cv2 = _realized_cv2(sizes)
            if (cv2 >= CV2_CUTOFF) != lumpy:
                continue
            break
        else:
            raise ValueError(f"series {i}: could not meet ADI {target_adi:.2f} / CV2 {target_cv2:.2f} "
                             f"within {spec.max_attempts} attempts")

        values = np.zeros(spec.span_days)
        values[slot_days[occ]] = sizes
        key = (f"M{i // 4:04d}", f"C{i % 4:03d}")
        series.append(DemandSeries(key, spec.start_date, values))
        params.append({
            "material": key[0], "client": key[1], "planted_type": "Lumpy" if lumpy else "Intermittent",
            "target_adi": target_adi, "realized_adi": adi, "target_cv2": target_cv2,
            "realized_cv2": cv2, "mean_size": mean_size,
            "admitted_weekdays": " ".join(str(d) for d in admitted),
            "n_demands": len(occ),
        })
        label_frames.append(pd.DataFrame({
            "date": days[weekday], "material": key[0], "client": key[1],
            "occurrence": (values[weekday] > 0).astype(int),
        }))
    labels = (pd.concat(label_frames, ignore_index=True) if label_frames
              else pd.DataFrame(columns=["date", "material", "client", "occurrence"]))
    return SyntheticData(series, labels, pd.DataFrame(params))


__all__ = ["SyntheticSpec", "SyntheticData", "generate_synthetic"]
