"""Two-fold demand forecast: an occurrence classifier decides whether demand
happens on a date, a size estimator decides how much."""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from .adida import AggregationPlan, adida_forecast, default_bucket_length, ses_inner
from .core import DemandSeries, SeriesForecast
from .forecasters import (
    DEFAULT_ALPHA,
    DEFAULT_BETA,
    CrostonFilter,
    FrequencyFilter,
    SBAFilter,
    TSBFilter,
    exponential_smoothing,
    jitter,
)
from .occurrence import (
    BoostingParams,
    HybridParams,
    NoModelError,
    extract_occurrence_features,
    feature_columns,
    fit_boosted,
    fit_hybrid_mlp,
    fit_markov,
    hybrid_inputs,
    predict_occurrence,
)
from .size import EnsembleParams, extract_size_features, fit_ensemble
from .taxonomy import UndefinedPatternError, classify

CLASSIFIER_IDS = ("C1", "C2", "markov", "hybrid_mlp", "implied", "oracle")
SIZE_METHOD_IDS = ("naive", "ma3", "mfv", "ses", "rand", "R2", "R3")
BASELINE_IDS = ("croston", "sba", "tsb", "adida", "willemain", "hybrid")
UNDEFINED_TYPE = "Undefined"

_LOCAL_COLUMN = {"naive": "last_demand_size", "ma3": "mean_last3", "mfv": "mfv_past", "ses": "ses_past"}


class LeakageError(ValueError):
    """A forecast would use data that is not older than target minus horizon."""

    def __init__(self, feature: str, date, message: str = ""):
        self.feature = feature
        self.date = date
        super().__init__(message or f"leakage in {feature!r} at {date}")


class NotFittedError(RuntimeError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    classifier_id: str = "C2"
    size_method_id: str = "ses"
    threshold: float = 0.5
    horizon_days: int = 14
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    seed: int = 0
    train_window_days: Optional[int] = 365
    include_extra_features: bool = False
    boosting: BoostingParams = field(default_factory=BoostingParams)
    ensemble: EnsembleParams = field(default_factory=EnsembleParams)
    hybrid: HybridParams = field(default_factory=HybridParams)

    def __post_init__(self):
        if self.classifier_id not in CLASSIFIER_IDS:
            raise ValueError(f"unknown classifier id {self.classifier_id!r}")
        if self.size_method_id not in SIZE_METHOD_IDS:
            raise ValueError(f"unknown size method id {self.size_method_id!r}")
        if not 0 < self.threshold < 1:
            raise ValueError(f"threshold must lie in (0, 1), got {self.threshold}")
        if self.horizon_days < 1:
            raise ValueError("horizon_days must be positive")
        if not 0 < self.alpha <= 1 or not 0 < self.beta <= 1:
            raise ValueError("alpha and beta must lie in (0, 1]")


# --- grids ------------------------------------------------------------------


def _day(value) -> np.datetime64:
    return np.datetime64(value, "D")


def weekday_view(series: DemandSeries) -> tuple[np.ndarray, np.ndarray]:
    """Weekday dates and values of ``series`` (weekend days dropped)."""
    days = series.dates
    mask = np.is_busday(days)
    return days[mask], series.values[mask]


def target_grid(series: DemandSeries, target_dates, horizon_days: int) -> np.ndarray:
    """Weekday targets whose cut-off ``target - horizon`` is inside the series."""
    t = np.asarray([_day(d) for d in target_dates], dtype="datetime64[D]")
    t = np.unique(t[np.is_busday(t)])
    return t[t - np.timedelta64(horizon_days, "D") >= _day(series.start_date)]


def training_targets(series: DemandSeries, data_end, window_days: Optional[int]) -> np.ndarray:
    """Weekday dates before ``data_end`` used as training examples."""
    end = _day(data_end)
    lo = _day(series.start_date)
    if window_days is not None:
        lo = max(lo, end - np.timedelta64(window_days, "D"))
    if lo >= end:
        return np.zeros(0, dtype="datetime64[D]")
    days = np.arange(lo, end, dtype="datetime64[D]")
    return days[np.is_busday(days)]


def truncate_before(series_set: Sequence[DemandSeries], data_end) -> list[DemandSeries]:
    """Series restricted to days strictly before ``data_end``; empty ones dropped."""
    last = (_day(data_end) - np.timedelta64(1, "D")).astype(object)
    return [s.truncate(last) for s in series_set if s.start_date <= last]


def cutoff_positions(grid_days: np.ndarray, targets: np.ndarray, horizon_days: int) -> np.ndarray:
    """Index of the last grid day at or before each ``target - horizon`` (-1 if none)."""
    cut = targets - np.timedelta64(horizon_days, "D")
    return np.searchsorted(grid_days, cut, side="right") - 1


def demand_types(series_set: Sequence[DemandSeries], data_end=None) -> dict:
    """Quadrant name per series key, from data strictly before ``data_end``."""
    out = {}
    for s in series_set if data_end is None else truncate_before(series_set, data_end):
        try:
            out[s.key] = classify(s).quadrant.value
        except UndefinedPatternError:
            out[s.key] = UNDEFINED_TYPE
    for s in series_set:
        out.setdefault(s.key, UNDEFINED_TYPE)
    return out


def series_rng(seed: int, key, data_end) -> np.random.Generator:
    """Generator keyed by (seed, series, fold) so draws do not depend on order."""
    tag = zlib.crc32("|".join(key).encode())
    day = int(_day(data_end).astype("int64"))
    return np.random.default_rng([int(seed), tag, day & 0xFFFFFFFF])


def check_leakage(data_end, targets: np.ndarray, horizon_days: int, feature: str = "training_data"):
    if len(targets) == 0:
        return
    first = targets.min()
    if first - np.timedelta64(horizon_days, "D") < _day(data_end):
        raise LeakageError(feature, first.astype(object),
                           f"{feature}: model data reaches {data_end}, target {first} minus "
                           f"{horizon_days} days is older")


# --- size -------------------------------------------------------------------


def _rand_sizes(series: DemandSeries, targets: np.ndarray, horizon_days: int, rng) -> np.ndarray:
    start = _day(series.start_date)
    demand_idx = np.flatnonzero(series.values > 0)
    sizes = series.values[demand_idx]
    cut = (targets - np.timedelta64(horizon_days, "D") - start).astype(int)
    k = np.searchsorted(demand_idx, cut, side="right")
    out = np.full(len(targets), np.nan)
    for j in range(len(targets)):
        if k[j] > 0:
            x = float(sizes[rng.integers(k[j])])
            out[j] = jitter(x, float(rng.standard_normal()))
    return out


def _attach(rows: pd.DataFrame, types: dict) -> pd.DataFrame:
    keys = list(zip(rows["material_id"], rows["client_id"]))
    return rows.assign(demand_type=[types.get(k, UNDEFINED_TYPE) for k in keys])


# --- the two-fold forecaster --------------------------------------------------


class TwoFoldForecaster:
    """Occurrence classifier composed with a size estimator.

    ``fit`` sees only data strictly before ``data_end``; ``forecast`` refuses
    targets closer than the horizon to that boundary.  Fitted components can
    be shared between forecasters through ``cache`` (keyed by component and
    its settings) to avoid refitting the same classifier per size method.
    """

    def __init__(self, config: PipelineConfig, types: Optional[dict] = None):
        self.config = config
        self.types = types
        self.data_end_ = None

    # -- fitting

    def fit(self, series_set: Sequence[DemandSeries], data_end, cache: Optional[dict] = None):
        cfg = self.config
        cache = {} if cache is None else cache
        self.data_end_ = _day(data_end)
        train = truncate_before(series_set, data_end)
        if not train:
            raise ValueError(f"no data before {data_end}")
        if self.types is None:
            self.types = demand_types(series_set, data_end)
        h = cfg.horizon_days
        self.classifier_ = None
        self.size_model_ = None

        if cfg.classifier_id in ("C1", "C2"):
            scope = "per_type" if cfg.classifier_id == "C1" else "global"
            ckey = ("boosted", scope, h, str(self.data_end_), cfg.train_window_days, cfg.boosting,
                    cfg.seed, cfg.include_extra_features)
            if ckey not in cache:
                targets = {s.key: training_targets(s, data_end, cfg.train_window_days) for s in train}
                rows, _ = extract_occurrence_features(train, targets, h)
                rows = _attach(rows[rows["label"].notna()], self.types)
                cache[ckey] = fit_boosted(rows, scope, cfg.boosting, cfg.seed,
                                          feature_columns(cfg.include_extra_features))
            self.classifier_ = cache[ckey]
        elif cfg.classifier_id in ("markov", "hybrid_mlp"):
            self.classifier_ = fit_series_occurrence(train, cfg.classifier_id, h, cfg.hybrid, cfg.seed, cache,
                                                     str(self.data_end_))

        if cfg.size_method_id in ("R2", "R3"):
            scope = "per_type" if cfg.size_method_id == "R2" else "global"
            skey = ("ensemble", scope, h, str(self.data_end_), cfg.ensemble, cfg.seed, cfg.alpha)
            if skey not in cache:
                targets = {s.key: np.arange(_day(s.start_date), self.data_end_, dtype="datetime64[D]")
                           for s in train}
                rows, _ = extract_size_features(train, targets, h, cfg.alpha, training=True)
                if len(rows) == 0:
                    raise ValueError("no training demand for the size ensemble")
                cache[skey] = fit_ensemble(_attach(rows, self.types), scope, cfg.ensemble, cfg.seed)
            self.size_model_ = cache[skey]
        return self

    # -- forecasting

    def occurrence_scores(self, series_set, targets: dict) -> dict:
        """Per-series ``(score, raw_score)`` over each series' target grid."""
        cfg = self.config
        h = cfg.horizon_days
        out = {}
        cid = cfg.classifier_id
        if cid in ("C1", "C2"):
            rows, _ = extract_occurrence_features(series_set, targets, h)
            rows = _attach(rows, self.types)
            scores = predict_occurrence(self.classifier_, rows)
            keys = list(zip(rows["material_id"], rows["client_id"]))
            pos = 0
            for s in series_set:
                n = len(targets[s.key])
                assert all(k == s.key for k in keys[pos:pos + n])
                out[s.key] = (scores[pos:pos + n], False)
                pos += n
            return out
        for s in series_set:
            t = targets[s.key]
            if cid == "oracle":
                idx = (t - _day(s.start_date)).astype(int)
                ok = idx < len(s.values)
                score = np.zeros(len(t))
                score[ok] = (s.values[idx[ok]] > 0).astype(float)
                out[s.key] = (score, False)
            elif cid == "implied":
                days, values = weekday_view(s)
                f = CrostonFilter(cfg.alpha).fit(values)
                pos = cutoff_positions(days, t, h)
                out[s.key] = (np.array([f.score_at(int(p)) for p in pos]), False)
            else:
                out[s.key] = series_model_scores(self.classifier_, s, t, h)
        return out

    def size_estimates(self, series_set, targets: dict) -> dict:
        cfg = self.config
        h = cfg.horizon_days
        method = cfg.size_method_id
        out = {}
        if method == "rand":
            for s in series_set:
                out[s.key] = _rand_sizes(s, targets[s.key], h, series_rng(cfg.seed, s.key, self.data_end_))
            return out
        rows, _ = extract_size_features(series_set, targets, h, cfg.alpha)
        if method in ("R2", "R3") and len(rows):
            values = self.size_model_.predict(_attach(rows, self.types))
        else:
            values = rows[_LOCAL_COLUMN[method]].to_numpy(dtype=float) if len(rows) else np.zeros(0)
        rows = rows.assign(size=values)
        grouped = {k: g for k, g in rows.groupby(["material_id", "client_id"], sort=False)}
        for s in series_set:
            t = targets[s.key]
            size = np.full(len(t), np.nan)
            g = grouped.get(s.key)
            if g is not None:
                size[np.searchsorted(t, g["date"].to_numpy(dtype="datetime64[D]"))] = g["size"].to_numpy()
            out[s.key] = size
        return out

    def forecast(self, series_set: Sequence[DemandSeries], target_dates) -> list[SeriesForecast]:
        """One :class:`SeriesForecast` per series over its weekday targets.

        ``target_dates`` is a shared sequence or a mapping key -> dates.
        Dates with no visible demand history get no size estimate and are
        never flagged.
        """
        if self.data_end_ is None:
            raise NotFittedError("TwoFoldForecaster is not fitted")
        cfg = self.config
        targets = {}
        for s in series_set:
            dates = target_dates[s.key] if isinstance(target_dates, dict) else target_dates
            targets[s.key] = target_grid(s, dates, cfg.horizon_days)
            check_leakage(self.data_end_, targets[s.key], cfg.horizon_days)
        scores = self.occurrence_scores(series_set, targets)
        sizes = self.size_estimates(series_set, targets)
        out = []
        for s in series_set:
            score, raw = scores[s.key]
            size = sizes[s.key]
            flag = (score > 0) if raw else (score >= cfg.threshold)
            flag &= ~np.isnan(size)
            out.append(SeriesForecast.from_parts(s.key, targets[s.key], score, flag,
                                                 np.nan_to_num(size, nan=0.0), raw_score=raw))
        return out


# --- per-series occurrence models --------------------------------------------


@dataclass
class SeriesModels:
    kind: str
    models: dict
    horizon_days: int


def fit_series_occurrence(train: Sequence[DemandSeries], kind: str, horizon_days: int,
                          hybrid: HybridParams = HybridParams(), seed: int = 0,
                          cache: Optional[dict] = None, tag: str = "") -> SeriesModels:
    """Markov chain (and, for ``hybrid_mlp``, a network) per series on the weekday grid."""
    cache = {} if cache is None else cache
    key = ("series_occ", kind, horizon_days, tag, hybrid, seed)
    if tag and key in cache:
        return cache[key]
    steps = max(1, int(round(horizon_days * 5 / 7)))
    models = {}
    for s in train:
        _, values = weekday_view(s)
        entry = {}
        if len(values) >= 2:
            entry["markov"] = fit_markov(values)
        if kind == "hybrid_mlp":
            try:
                entry["mlp"] = fit_hybrid_mlp(values, steps, hybrid, seed)
            except NoModelError:
                pass
        models[s.key] = entry
    result = SeriesModels(kind, models, horizon_days)
    if tag:
        cache[key] = result
    return result


def series_model_scores(fitted: SeriesModels, series: DemandSeries, targets: np.ndarray, horizon_days: int,
                        cut: Optional[np.ndarray] = None):
    """``(scores, raw)``: network outputs when a network exists, else Markov probabilities.

    ``cut`` holds the weekday-grid position of the last visible period per
    target; by default the last weekday at or before ``target - horizon``.
    """
    days, values = weekday_view(series)
    if cut is None:
        cut = cutoff_positions(days, targets, horizon_days)
    tpos = np.searchsorted(days, targets)
    entry = fitted.models.get(series.key, {})
    if fitted.kind == "hybrid_mlp" and "mlp" in entry:
        _, raw = entry["mlp"].predict(hybrid_inputs(values, cut, tpos))
        return raw, True
    chain = entry.get("markov")
    if chain is None:
        return np.zeros(len(targets)), False
    power = {}
    out = np.empty(len(targets))
    for j, (c, t) in enumerate(zip(cut, tpos)):
        state = bool(values[c] > 0) if c >= 0 else False
        steps = int(t - c)
        if steps not in power:
            power[steps] = (chain.predict_proba(False, steps), chain.predict_proba(True, steps))
        out[j] = power[steps][int(state)]
    return out, False


# --- baselines ----------------------------------------------------------------


@dataclass(frozen=True)
class BaselineConfig:
    method: str
    horizon_days: int = 14
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    threshold: float = 0.5
    seed: int = 0
    bucket_length: Optional[int] = None
    adida_mode: str = "non-overlapping"
    hybrid: HybridParams = field(default_factory=HybridParams)

    def __post_init__(self):
        if self.method not in BASELINE_IDS:
            raise ValueError(f"unknown baseline {self.method!r}")


def forecast_baseline(config: BaselineConfig, series_set: Sequence[DemandSeries], target_dates,
                      data_end, cache: Optional[dict] = None) -> list[SeriesForecast]:
    """Reference methods fit on the weekday grid before ``data_end``.

    Every forecast is issued from that origin, so Croston, SBA and TSB give
    one flat value per series until the next refit.  Flags follow the
    pipeline rule ``score >= threshold`` on the implied score (Markov
    probability for Willemain, ``output > 0`` for the hybrid network).
    """
    h = config.horizon_days
    m = config.method
    end = _day(data_end)
    series_models = None
    if m in ("willemain", "hybrid"):
        train = truncate_before(series_set, data_end)
        kind = "hybrid_mlp" if m == "hybrid" else "markov"
        series_models = fit_series_occurrence(train, kind, h, config.hybrid, config.seed, cache, str(end))
    out = []
    for s in series_set:
        dates = target_dates[s.key] if isinstance(target_dates, dict) else target_dates
        t = target_grid(s, dates, h)
        check_leakage(end, t, h)
        days, values = weekday_view(s)
        n_train = int(np.searchsorted(days, end))
        head = values[:n_train]
        origin = n_train - 1
        ahead = np.searchsorted(days, t) - origin
        ones = np.ones(len(t))
        if m in ("croston", "sba", "tsb", "adida"):
            if origin < 0:
                forecast, score = 0.0 * ones, 0.0 * ones
            elif m == "adida":
                bucket = config.bucket_length or _bucket_for(head)
                forecast = np.zeros(len(t))
                if n_train >= bucket and len(t):
                    plan = AggregationPlan(bucket, config.adida_mode, ses_inner(config.alpha))
                    daily = adida_forecast(head, plan, int(ahead.max()))
                    forecast = daily[ahead - 1]
                score = FrequencyFilter().fit(head).score_at(origin) * ones
            else:
                if m == "tsb":
                    f = TSBFilter(config.alpha, config.beta, p0=float(np.mean(head > 0))).fit(head)
                else:
                    f = (SBAFilter if m == "sba" else CrostonFilter)(config.alpha).fit(head)
                forecast = f.forecast_at(origin) * ones
                score = f.score_at(origin) * ones
            out.append(SeriesForecast.point_forecast(s.key, t, score, score >= config.threshold, forecast))
            continue
        cut = np.full(len(t), origin)
        score, raw = series_model_scores(series_models, s, t, h, cut)
        flag = (score > 0) if raw else (score >= config.threshold)
        if m == "willemain":
            size = _bootstrap_sizes(head, len(t), series_rng(config.seed, s.key, end))
        else:
            sizes = head[head > 0]
            size = np.full(len(t), exponential_smoothing(sizes, config.alpha) if len(sizes) else 0.0)
        out.append(SeriesForecast.from_parts(s.key, t, score, flag & (size > 0), size, raw_score=raw))
    return out


def _bootstrap_sizes(history: np.ndarray, n: int, rng) -> np.ndarray:
    """Jittered resamples of past nonzero sizes, one per target."""
    sizes = history[history > 0]
    if len(sizes) == 0:
        return np.zeros(n)
    picks = sizes[rng.integers(len(sizes), size=n)]
    z = rng.standard_normal(n)
    return np.array([jitter(float(x), float(zz)) for x, zz in zip(picks, z)])


def _bucket_for(values: np.ndarray) -> int:
    try:
        return default_bucket_length(values)
    except ValueError:
        return 1


def with_horizon(config, horizon_days: int):
    return replace(config, horizon_days=horizon_days)
