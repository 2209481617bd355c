"""Occurrence, size and inventory metrics: AUC ROC, MASE_I/MASE_II, SPEC."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

SPEC_ALPHA1 = 0.5
SPEC_ALPHA2 = 0.5


class UndefinedMetricError(ValueError):
    pass


def auc_roc(scores, labels) -> float:
    """Mann-Whitney estimate of the ROC area; tied scores share their mean rank."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must have the same shape")
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        missing = "positive" if n_pos == 0 else "negative"
        raise UndefinedMetricError(f"AUC undefined: no {missing} labels")
    ranks = rankdata(scores)
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def thresholded_auc(scores, labels, threshold: float = 0.5) -> float:
    """AUC of the hard decisions ``score >= threshold`` (balanced accuracy)."""
    return auc_roc(np.asarray(scores, dtype=float) >= threshold, labels)


def confusion_counts(flags, labels) -> dict[str, int]:
    flags = np.asarray(flags, dtype=bool)
    labels = np.asarray(labels, dtype=bool)
    return {
        "tp": int(np.sum(flags & labels)),
        "fp": int(np.sum(flags & ~labels)),
        "fn": int(np.sum(~flags & labels)),
        "tn": int(np.sum(~flags & ~labels)),
    }


# --- MASE -------------------------------------------------------------------


def mae(forecasts, actuals) -> float:
    forecasts = np.asarray(forecasts, dtype=float)
    actuals = np.asarray(actuals, dtype=float)
    return float(np.mean(np.abs(actuals - forecasts)))


def naive_scale(train) -> float:
    """In-sample MAE of the one-step naive forecast."""
    train = np.asarray(train, dtype=float)
    if len(train) < 2:
        raise UndefinedMetricError("naive scale needs at least two training values")
    scale = mae(train[:-1], train[1:])
    if scale == 0:
        raise UndefinedMetricError("naive scale is zero (constant training series)")
    return scale


def mase(forecasts, actuals, scale_denominator: float) -> float:
    if not scale_denominator > 0:
        raise UndefinedMetricError(f"MASE scale must be positive, got {scale_denominator}")
    if len(np.atleast_1d(actuals)) == 0:
        raise UndefinedMetricError("MASE of an empty evaluation set")
    return mae(forecasts, actuals) / scale_denominator


def compressed_scale(train_values) -> float:
    """Naive scale of the training series with zero-demand periods removed."""
    train = np.asarray(train_values, dtype=float)
    return naive_scale(train[train > 0])


def mase_i(size_forecasts, actuals, train_values) -> float:
    """Size error at the true demand periods of the test segment.

    ``size_forecasts`` and ``actuals`` are aligned over the test grid; only
    periods with positive actual demand are scored, as if occurrence were
    predicted perfectly.
    """
    size_forecasts = np.asarray(size_forecasts, dtype=float)
    actuals = np.asarray(actuals, dtype=float)
    mask = actuals > 0
    if not mask.any():
        raise UndefinedMetricError("MASE_I needs at least one test demand")
    return mase(size_forecasts[mask], actuals[mask], compressed_scale(train_values))


def mase_ii(flags, combined, actuals, train_values) -> float:
    """Combined-forecast error over true-demand or flagged periods.

    Uses the same scale as :func:`mase_i`, so a perfect occurrence model
    makes the two coincide.
    """
    flags = np.asarray(flags, dtype=bool)
    combined = np.asarray(combined, dtype=float)
    actuals = np.asarray(actuals, dtype=float)
    mask = (actuals > 0) | flags
    if not mask.any():
        raise UndefinedMetricError("MASE_II: no demand and no flagged periods")
    return mase(combined[mask], actuals[mask], compressed_scale(train_values))


# --- SPEC -------------------------------------------------------------------


def _check_spec_inputs(forecasts, actuals):
    f = np.asarray(forecasts, dtype=float)
    y = np.asarray(actuals, dtype=float)
    if f.shape != y.shape or f.ndim != 1:
        raise ValueError("forecasts and actuals must be equal-length 1-d sequences")
    if np.any(f < 0) or np.any(y < 0):
        raise ValueError("SPEC needs non-negative forecasts and actuals")
    return f, y


def spec_terms(forecasts, actuals, alpha1: float = SPEC_ALPHA1, alpha2: float = SPEC_ALPHA2):
    """Opportunity and stock-keeping cost branches for every ``(t, i)``, ``i <= t``.

    Returns two ``n x n`` arrays indexed ``[t, i]`` (zero above the
    diagonal), before the ``max(0, ., .)`` and the delay weight.  Demand
    ``y_i`` incurs opportunity cost while cumulative demand up to ``i``
    exceeds everything forecast up to ``t``; forecast ``f_i`` incurs
    stock-keeping cost while it exceeds cumulative demand up to ``t``.
    """
    f, y = _check_spec_inputs(forecasts, actuals)
    cy = np.cumsum(y)
    cf = np.cumsum(f)
    lower = np.tri(len(y), dtype=bool)
    opportunity = np.minimum(y[None, :], cy[None, :] - cf[:, None]) * alpha1
    stock = np.minimum(f[None, :], cf[None, :] - cy[:, None]) * alpha2
    return np.where(lower, opportunity, 0.0), np.where(lower, stock, 0.0)


def spec(forecasts, actuals, alpha1: float = SPEC_ALPHA1, alpha2: float = SPEC_ALPHA2) -> float:
    """Stock-keeping-oriented Prediction Error Costs, averaged over periods."""
    f, y = _check_spec_inputs(forecasts, actuals)
    n = len(y)
    if n == 0:
        raise UndefinedMetricError("SPEC of an empty sequence")
    opportunity, stock = spec_terms(f, y, alpha1, alpha2)
    t = np.arange(n)
    delay = (t[:, None] - t[None, :] + 1) * np.tri(n)
    cost = np.maximum(0.0, np.maximum(opportunity, stock)) * delay
    return float(cost.sum() / n)


# --- aggregation ------------------------------------------------------------


@dataclass
class MetricReport:
    auc_roc: float
    mase_I: float
    mase_II: float
    spec_median: float
    spec_per_series: list[float] = field(default_factory=list)
    auc_roc_thresholded: float = float("nan")
    n_series: int = 0
    n_mase_excluded: int = 0
    confusion: dict[str, int] = field(default_factory=dict)

    def as_row(self) -> dict[str, float]:
        row = {
            "auc_roc": self.auc_roc,
            "auc_roc_thresholded": self.auc_roc_thresholded,
            "mase_I": self.mase_I,
            "mase_II": self.mase_II,
            "spec_median": self.spec_median,
            "n_series": self.n_series,
            "n_mase_excluded": self.n_mase_excluded,
        }
        row.update(self.confusion)
        return row


def median_or_nan(values) -> float:
    values = np.asarray(values, dtype=float)
    return float(np.median(values)) if len(values) else float("nan")


def mean_or_nan(values) -> float:
    values = np.asarray(values, dtype=float)
    return float(np.mean(values)) if len(values) else float("nan")
