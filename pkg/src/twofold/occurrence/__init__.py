"""Demand-occurrence models and their features."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

from .boosting import BoostedClassifier, BoostingParams, SchemaError
from .features import (
    CATEGORICAL_FEATURES,
    EXTRA_OCCURRENCE_FEATURES,
    OCCURRENCE_FEATURES,
    extract_occurrence_features,
    feature_columns,
)
from .focal import focal_grad, focal_grad_hess, focal_loss, logloss_grad_hess, newton_hessian
from .hybrid import HybridMLP, HybridParams, NoModelError, fit_hybrid_mlp, hybrid_inputs
from .markov import MarkovOccurrence, fit_markov

GROUP_COLUMN = "demand_type"


@dataclass
class GroupedClassifier:
    """One boosted model per demand type, with a pooled fallback for
    types that are missing or lack one of the classes."""

    models: dict[str, BoostedClassifier]
    fallback: Optional[BoostedClassifier] = None
    group_column: str = GROUP_COLUMN
    features: list[str] = field(default_factory=list)

    def predict_proba(self, rows: pd.DataFrame) -> np.ndarray:
        if self.group_column not in rows.columns:
            raise SchemaError(f"rows lack the group column {self.group_column!r}")
        out = np.empty(len(rows))
        groups = rows[self.group_column].to_numpy()
        for g in pd.unique(groups):
            idx = np.flatnonzero(groups == g)
            model = self.models.get(g, self.fallback)
            if model is None:
                raise ValueError(f"no model for demand type {g!r} and no fallback")
            out[idx] = model.predict_proba(rows.iloc[idx])
        return out


def _labels(rows: pd.DataFrame) -> np.ndarray:
    lab = rows["label"]
    if lab.isna().any():
        raise ValueError("training rows must all have known labels")
    return lab.to_numpy(dtype=bool)


def fit_boosted(rows: pd.DataFrame, scope: str = "global", params: BoostingParams = BoostingParams(),
                seed: int = 0, features: Optional[list[str]] = None, min_group_rows: int = 50):
    """Fit the occurrence classifier.

    ``scope="global"`` pools every row; ``scope="per_type"`` fits one model
    per value of the ``demand_type`` column.
    """
    features = list(features or feature_columns())
    cats = [f for f in CATEGORICAL_FEATURES if f in features]
    if scope == "global":
        return BoostedClassifier(features, cats, params, seed).fit(rows, _labels(rows))
    if scope != "per_type":
        raise ValueError(f"unknown scope {scope!r}")
    if GROUP_COLUMN not in rows.columns:
        raise SchemaError(f"per-type fitting needs a {GROUP_COLUMN!r} column")
    models = {}
    need_fallback = False
    for g, part in rows.groupby(GROUP_COLUMN, sort=True):
        y = _labels(part)
        if len(part) < min_group_rows or y.all() or not y.any():
            need_fallback = True
            continue
        models[g] = BoostedClassifier(features, cats, params, seed).fit(part, y)
    fallback = None
    if need_fallback or not models:
        fallback = BoostedClassifier(features, cats, params, seed).fit(rows, _labels(rows))
    return GroupedClassifier(models, fallback, GROUP_COLUMN, features)


def predict_occurrence(model, rows: pd.DataFrame) -> np.ndarray:
    if len(rows) == 0:
        return np.zeros(0)
    return model.predict_proba(rows)


__all__ = [
    "BoostedClassifier", "BoostingParams", "GroupedClassifier", "HybridMLP", "HybridParams",
    "MarkovOccurrence", "NoModelError", "SchemaError", "OCCURRENCE_FEATURES",
    "EXTRA_OCCURRENCE_FEATURES", "CATEGORICAL_FEATURES", "extract_occurrence_features",
    "feature_columns", "fit_boosted", "fit_hybrid_mlp", "fit_markov", "focal_grad",
    "focal_grad_hess", "focal_loss", "hybrid_inputs", "logloss_grad_hess", "newton_hessian",
    "predict_occurrence",
]
