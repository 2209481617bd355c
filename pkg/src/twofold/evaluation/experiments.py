"""Experiment ids, fold-by-fold runs, metric pooling, and the experiment matrix."""

from __future__ import annotations

import datetime as dt
import re
from dataclasses import dataclass, field, replace
from functools import reduce
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from ..core import DemandSeries, SeriesForecast
from ..forecasters import DEFAULT_ALPHA, DEFAULT_BETA
from ..metrics import (
    MetricReport,
    UndefinedMetricError,
    auc_roc,
    confusion_counts,
    mase_i,
    mase_ii,
    mean_or_nan,
    median_or_nan,
    spec,
    thresholded_auc,
)
from ..occurrence import BoostingParams
from ..occurrence.hybrid import HybridParams
from ..pipeline import (
    BaselineConfig,
    LeakageError,
    PipelineConfig,
    TwoFoldForecaster,
    demand_types,
    forecast_baseline,
)
from ..size import EnsembleParams
from .splits import Fold, SplitPlan

R1_METHODS = ("NAIVE", "MA3", "SES", "MFV", "RAND")
TABLE4_IDS = tuple(f"{c}R1-{m}" for c in ("C1", "C2") for m in R1_METHODS) + tuple(
    f"{c}{r}-ML" for c in ("C1", "C2") for r in ("R2", "R3"))
BASELINE_NAMES = {"CROSTON": "croston", "SBA": "sba", "TSB": "tsb", "ADIDA": "adida", "ADIDA-SES": "adida",
                  "WILLEMAIN": "willemain", "HYBRID": "hybrid", "NASIRI": "hybrid"}
OTHER_CLASSIFIERS = {"ORACLE": "oracle", "IMPLIED": "implied", "MARKOV": "markov", "MLP": "hybrid_mlp"}

_ID = re.compile(r"^(C1|C2|ORACLE|IMPLIED|MARKOV|MLP)-?(R1-(NAIVE|MA3|SES|MFV|RAND)|R2-ML|R3-ML)$")


class UnknownExperimentError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentSpec:
    """An experiment id plus everything needed to run it reproducibly."""

    id: str
    horizon_days: int = 14
    seed: int = 0
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    threshold: float = 0.5
    train_window_days: Optional[int] = 365
    alpha_grid: Optional[tuple[float, ...]] = None
    boosting: BoostingParams = field(default_factory=BoostingParams)
    ensemble: EnsembleParams = field(default_factory=EnsembleParams)
    hybrid: HybridParams = field(default_factory=HybridParams)
    include_extra_features: bool = False  # adds target_dow_share, an addition of this package

    def __post_init__(self):
        object.__setattr__(self, "id", self.id.strip().upper())
        parse_experiment_id(self.id)

    @property
    def is_baseline(self) -> bool:
        return self.id in BASELINE_NAMES

    def pipeline_config(self, alpha: Optional[float] = None) -> PipelineConfig:
        kind, classifier, size = parse_experiment_id(self.id)
        if kind != "pipeline":
            raise UnknownExperimentError(f"{self.id} is a baseline")
        return PipelineConfig(classifier, size, self.threshold, self.horizon_days, alpha or self.alpha, self.beta,
                              self.seed, self.train_window_days, self.include_extra_features, self.boosting,
                              self.ensemble, self.hybrid)

    def baseline_config(self, alpha: Optional[float] = None) -> BaselineConfig:
        if not self.is_baseline:
            raise UnknownExperimentError(f"{self.id} is not a baseline")
        return BaselineConfig(BASELINE_NAMES[self.id], self.horizon_days, alpha or self.alpha, self.beta,
                              self.threshold, self.seed, hybrid=self.hybrid)


def parse_experiment_id(exp_id: str) -> tuple[str, Optional[str], Optional[str]]:
    """``("pipeline", classifier_id, size_method_id)`` or ``("baseline", method, None)``."""
    key = exp_id.strip().upper()
    if key in BASELINE_NAMES:
        return "baseline", BASELINE_NAMES[key], None
    m = _ID.match(key)
    if not m:
        raise UnknownExperimentError(f"unknown experiment id {exp_id!r}")
    head, size_part = m.group(1), m.group(2)
    classifier = head if head in ("C1", "C2") else OTHER_CLASSIFIERS[head]
    size = m.group(3).lower() if m.group(3) else size_part[:2]
    return "pipeline", classifier, size


# --- fold runs ----------------------------------------------------------------


def _concat(parts: list[SeriesForecast]) -> SeriesForecast:
    return reduce(lambda a, b: a.concat(b), parts)


def _run_fold(spec: ExperimentSpec, series: Sequence[DemandSeries], fold: Fold, types: dict, cache: dict,
              alpha: float) -> list[SeriesForecast]:
    targets = fold.test_weekdays()
    if spec.is_baseline:
        return forecast_baseline(spec.baseline_config(alpha), series, targets, fold.train_end, cache)
    model = TwoFoldForecaster(spec.pipeline_config(alpha), types)
    return model.fit(series, fold.train_end, cache).forecast(series, targets)


def _validation_error(spec: ExperimentSpec, series, fold: Fold, types: dict, alpha: float, cache: dict) -> float:
    """Mean absolute combined error over the last month before ``fold.train_end``."""
    days = fold.validation_weekdays()
    first, last = days[0], np.datetime64(fold.train_end, "D") - 1
    inner = Fold(-1, first.astype(object), last.astype(object), (first - spec.horizon_days).astype(object))
    clipped = [s.truncate(inner.end) for s in series if s.start_date <= inner.end]
    err, n = 0.0, 0
    for s, f in zip(clipped, _run_fold(spec, clipped, inner, types, cache, alpha)):
        err += float(np.abs(f.combined - actuals_for(s, f)).sum())
        n += len(f)
    return err / n if n else np.inf


def select_alpha(spec: ExperimentSpec, series, fold: Fold, types: dict, cache: Optional[dict] = None) -> float:
    """Inner loop: the grid value with the lowest validation error (first wins ties)."""
    if not spec.alpha_grid:
        return spec.alpha
    cache = {} if cache is None else cache
    scores = [(_validation_error(spec, series, fold, types, a, cache), i) for i, a in enumerate(spec.alpha_grid)]
    return spec.alpha_grid[min(scores)[1]]


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    report: MetricReport
    forecasts: dict  # key -> pooled SeriesForecast
    alphas: list[float]


def run_experiment(spec: ExperimentSpec, series: Sequence[DemandSeries], plan: SplitPlan,
                   cache: Optional[dict] = None, types: Optional[dict] = None) -> ExperimentResult:
    """Fit and forecast every fold, then score the pooled predictions."""
    if plan.horizon_days != spec.horizon_days:
        plan = replace(plan, horizon_days=spec.horizon_days)
    plan.check()
    cache = {} if cache is None else cache
    folds = plan.folds()
    score_end = folds[0].train_end
    if types is None:
        types = demand_types(series, score_end)
    pooled: dict = {s.key: [] for s in series}
    alphas = []
    for fold in folds:
        alpha = select_alpha(spec, series, fold, types, cache)
        alphas.append(alpha)
        for f in _run_fold(spec, series, fold, types, cache, alpha):
            if len(f):
                pooled[f.key].append(f)
    forecasts = {k: _concat(v) for k, v in pooled.items() if v}
    report = score_forecasts(series, forecasts, score_end, spec.threshold)
    return ExperimentResult(spec, report, forecasts, alphas)


def actuals_for(series: DemandSeries, forecast: SeriesForecast) -> np.ndarray:
    idx = (forecast.dates - np.datetime64(series.start_date, "D")).astype(int)
    if np.any(idx < 0) or np.any(idx >= len(series.values)):
        raise ValueError(f"{series.key}: forecast dates outside the series")
    return series.values[idx]


def score_forecasts(series: Sequence[DemandSeries], forecasts: dict, train_end, threshold: float = 0.5,
                    keys=None) -> MetricReport:
    """The four metrics over pooled forecasts.

    MASE scales come from the series before ``train_end``; series whose
    scale or test demand is undefined are excluded and counted.
    """
    end = np.datetime64(train_end, "D")
    scores, labels, flags = [], [], []
    m1, m2, specs = [], [], []
    excluded = 0
    n_series = 0
    for s in series:
        if keys is not None and s.key not in keys:
            continue
        f = forecasts.get(s.key)
        if f is None or len(f) == 0:
            continue
        n_series += 1
        y = actuals_for(s, f)
        scores.append(f.score)
        labels.append(y > 0)
        flags.append(f.flag)
        train = s.values[: max(0, int((end - np.datetime64(s.start_date, "D")).astype(int)))]
        try:
            a, b = mase_i(f.size, y, train), mase_ii(f.flag, f.combined, y, train)
            m1.append(a)
            m2.append(b)
        except UndefinedMetricError:
            excluded += 1
        specs.append(spec(f.combined, y))
    if not scores:
        return MetricReport(np.nan, np.nan, np.nan, np.nan, [], np.nan, 0, 0, {})
    scores, labels, flags = map(np.concatenate, (scores, labels, flags))
    try:
        auc = auc_roc(scores, labels)
        auc_thr = thresholded_auc(flags.astype(float), labels)
    except UndefinedMetricError:
        auc = auc_thr = float("nan")
    return MetricReport(auc, mean_or_nan(m1), mean_or_nan(m2), median_or_nan(specs), specs, auc_thr,
                        n_series, excluded, confusion_counts(flags, labels))


# --- the matrix -----------------------------------------------------------------


TABLE4_COLUMNS = ["experiment", "horizon_days", "auc_roc", "auc_roc_thresholded", "mase_I", "mase_II",
                  "spec_median", "n_series", "n_mase_excluded", "tp", "fp", "fn", "tn", "error"]


@dataclass
class EvaluationReport:
    table4: pd.DataFrame
    table5: pd.DataFrame
    results: list[ExperimentResult] = field(default_factory=list)


def run_matrix(specs: Sequence[ExperimentSpec], series: Sequence[DemandSeries], plan: SplitPlan,
               horizons: Sequence[int] = (14, 56), subset_types: Sequence[str] = ("Lumpy", "Intermittent")
               ) -> EvaluationReport:
    """One overall-result row per (spec, horizon) and a C1-vs-C2 AUC table per demand type.

    A failing experiment is recorded in the ``error`` column and the
    matrix continues.
    """
    rows, results = [], []
    subset_auc: dict = {}
    for h in horizons:
        hplan = replace(plan, horizon_days=h)
        types = demand_types(series, hplan.folds()[0].train_end)
        cache: dict = {}
        for base in specs:
            spec_h = replace(base, horizon_days=h)
            row = {"experiment": spec_h.id, "horizon_days": h}
            try:
                res = run_experiment(spec_h, series, hplan, cache, types)
            except (ValueError, ArithmeticError, LeakageError) as exc:
                row["error"] = f"{type(exc).__name__}: {exc}"
                rows.append(row)
                continue
            results.append(res)
            row.update(res.report.as_row())
            row["error"] = ""
            rows.append(row)
            kind, classifier, _ = parse_experiment_id(spec_h.id)
            if kind == "pipeline" and classifier in ("C1", "C2"):
                for t in subset_types:
                    keys = {k for k, v in types.items() if v == t}
                    rep = score_forecasts(series, res.forecasts, hplan.folds()[0].train_end, spec_h.threshold, keys)
                    subset_auc.setdefault((classifier, t, h), rep.auc_roc)
    table4 = pd.DataFrame(rows, columns=TABLE4_COLUMNS)
    table5 = table5_frame(subset_auc, subset_types, horizons)
    return EvaluationReport(table4, table5, results)


def table5_frame(subset_auc: dict, subset_types: Sequence[str], horizons: Sequence[int]) -> pd.DataFrame:
    """Rows C1 and C2; one AUC column per (demand type, horizon).

    Uses the first experiment seen for each classifier (all experiments
    sharing a classifier share its scores).
    """
    if not subset_auc:
        return pd.DataFrame(columns=["classifier"])
    cols = [f"auc_{t.lower()}_h{h}" for h in horizons for t in subset_types]
    out = []
    for c in ("C1", "C2"):
        row = {"classifier": c}
        for h in horizons:
            for t in subset_types:
                row[f"auc_{t.lower()}_h{h}"] = subset_auc.get((c, t, h), np.nan)
        out.append(row)
    return pd.DataFrame(out, columns=["classifier", *cols])
