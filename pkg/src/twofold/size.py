"""Demand-size estimation: local estimators over the nonzero history and a
bagged tree-ensemble regressor over size features."""

from __future__ import annotations

import bisect
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from sklearn.ensemble import RandomForestRegressor

from .core import DemandSeries
from .forecasters import DEFAULT_ALPHA, NoForecastError, ma3, mfv, naive_last, rand_jitter, ses
from .occurrence.boosting import SchemaError, schema_hash

SIZE_FEATURES = ["last_demand_size", "mean_last3", "median_past", "mfv_past", "ses_past"]
LOCAL_METHODS = ("naive", "ma3", "mfv", "ses", "rand")
ENSEMBLE_FORMAT = "twofold.ensemble"
ENSEMBLE_VERSION = 1


class NoEstimateError(ValueError):
    pass


def prefix_size_table(sizes: np.ndarray, alpha: float = DEFAULT_ALPHA) -> np.ndarray:
    """Size features of ``sizes[:k]`` for k = 1..len, one row per k (row 0 = k=1).

    Incremental: a sorted copy for the median and running counts for the
    most frequent value (ties to the smallest).
    """
    sizes = np.asarray(sizes, dtype=float)
    n = len(sizes)
    out = np.empty((n, len(SIZE_FEATURES)))
    if n == 0:
        return out
    out[:, 0] = sizes
    c = np.concatenate([[0.0], np.cumsum(sizes)])
    k = np.arange(1, n + 1)
    lo = np.maximum(k - 3, 0)
    out[:, 1] = (c[k] - c[lo]) / (k - lo)
    ordered: list[float] = []
    counts: dict[float, int] = {}
    best, best_count = sizes[0], 0
    level = sizes[0]
    for j, v in enumerate(sizes.tolist()):
        bisect.insort(ordered, v)
        m = len(ordered)
        out[j, 2] = ordered[m // 2] if m % 2 else 0.5 * (ordered[m // 2 - 1] + ordered[m // 2])
        counts[v] = counts.get(v, 0) + 1
        if counts[v] > best_count or (counts[v] == best_count and v < best):
            best, best_count = v, counts[v]
        out[j, 3] = best
        if j:
            level = alpha * v + (1 - alpha) * level
        out[j, 4] = level
    return out


def series_size_features(series: DemandSeries, target_dates, horizon_days: int,
                         alpha: float = DEFAULT_ALPHA, training: bool = False):
    """Size rows for one series; returns ``(frame, n_skipped)``.

    With ``training=True`` only targets with positive demand are kept and
    ``target_size`` holds the label.  Targets without any nonzero demand
    visible at ``target - horizon`` are skipped and counted.
    """
    targets = np.asarray([np.datetime64(d, "D") for d in target_dates], dtype="datetime64[D]")
    start = np.datetime64(series.start_date, "D")
    values = series.values
    n = len(values)
    t_idx = (targets - start).astype(int)
    known = (t_idx >= 0) & (t_idx < n)
    actual = np.where(known, values[np.clip(t_idx, 0, max(n - 1, 0))] if n else 0.0, np.nan)
    if training:
        keep = known & (actual > 0)
        targets, t_idx, actual = targets[keep], t_idx[keep], actual[keep]
    demand_idx = np.flatnonzero(values > 0)
    cut_idx = t_idx - int(horizon_days)
    k = np.searchsorted(demand_idx, cut_idx, side="right")
    ok = (k > 0) & (cut_idx >= 0)
    skipped = int(np.count_nonzero(~ok))
    table = prefix_size_table(values[demand_idx], alpha)
    feats = table[k[ok] - 1] if len(table) else np.zeros((0, len(SIZE_FEATURES)))
    frame = pd.DataFrame(feats, columns=SIZE_FEATURES)
    frame.insert(0, "date", targets[ok])
    frame.insert(0, "client_id", series.key[1])
    frame.insert(0, "material_id", series.key[0])
    frame["n_visible"] = k[ok]
    frame["target_size"] = actual[ok]
    return frame, skipped


def extract_size_features(series_set: Sequence[DemandSeries], target_dates, horizon_days: int,
                          alpha: float = DEFAULT_ALPHA, training: bool = False):
    frames, skipped = [], 0
    for s in series_set:
        dates = target_dates[s.key] if isinstance(target_dates, dict) else target_dates
        frame, n_skip = series_size_features(s, dates, horizon_days, alpha, training)
        frames.append(frame)
        skipped += n_skip
    if not frames:
        cols = ["material_id", "client_id", "date", *SIZE_FEATURES, "n_visible", "target_size"]
        return pd.DataFrame({c: [] for c in cols}), skipped
    return pd.concat(frames, ignore_index=True), skipped


@dataclass(frozen=True)
class EnsembleParams:
    n_trees: int = 300
    max_depth: Optional[int] = 12
    bootstrap: bool = True
    max_samples: Optional[float] = None  # bootstrap fraction; None = 1.0
    min_samples_leaf: int = 1


@dataclass
class _ArrayTree:
    left: np.ndarray
    right: np.ndarray
    feature: np.ndarray
    threshold: np.ndarray
    value: np.ndarray

    def predict(self, X32: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X32), dtype=np.int64)
        rows = np.arange(len(X32))
        while True:
            active = self.left[node] >= 0
            if not active.any():
                return self.value[node]
            f = np.where(active, self.feature[node], 0)
            go_left = X32[rows, f] <= self.threshold[node]
            node = np.where(active, np.where(go_left, self.left[node], self.right[node]), node)


@dataclass
class TreeEnsembleRegressor:
    """Bagged squared-error regression trees; prediction is the tree mean,
    clipped below at the smallest training label."""

    features: list[str] = field(default_factory=lambda: list(SIZE_FEATURES))
    params: EnsembleParams = field(default_factory=EnsembleParams)
    seed: int = 0
    trees: list[_ArrayTree] = field(default_factory=list)
    floor: float = 0.0
    ceiling: float = np.inf

    @property
    def schema(self) -> str:
        return schema_hash(self.features, [])

    def _matrix(self, rows) -> np.ndarray:
        if isinstance(rows, pd.DataFrame):
            missing = [f for f in self.features if f not in rows.columns]
            if missing:
                raise SchemaError(f"rows lack model features: {', '.join(missing)}")
            X = rows[self.features].to_numpy(dtype=float)
        else:
            X = np.asarray(rows, dtype=float)
        if X.ndim != 2 or X.shape[1] != len(self.features):
            raise SchemaError(f"expected {len(self.features)} feature columns")
        # sklearn trees split on float32 inputs
        return X.astype(np.float32).astype(np.float64)

    def fit(self, rows, labels=None) -> "TreeEnsembleRegressor":
        X = self._matrix(rows)
        y = np.asarray(rows["target_size"] if labels is None else labels, dtype=float)
        if len(y) == 0:
            raise ValueError("cannot fit the size ensemble on an empty row set")
        p = self.params
        forest = RandomForestRegressor(
            n_estimators=p.n_trees, max_depth=p.max_depth, bootstrap=p.bootstrap,
            max_samples=p.max_samples if p.bootstrap else None,
            min_samples_leaf=p.min_samples_leaf, max_features=1.0,
            random_state=self.seed, n_jobs=1,
        )
        forest.fit(X, y)
        self.trees = [
            _ArrayTree(t.tree_.children_left.astype(np.int64), t.tree_.children_right.astype(np.int64),
                       t.tree_.feature.astype(np.int64), t.tree_.threshold.astype(float),
                       t.tree_.value[:, 0, 0].astype(float))
            for t in forest.estimators_
        ]
        positive = y[y > 0]
        self.floor = float(positive.min()) if len(positive) else 0.0
        self.ceiling = float(y.max())
        return self

    def predict(self, rows) -> np.ndarray:
        if not self.trees:
            raise RuntimeError("ensemble is not fitted")
        X = self._matrix(rows)
        if len(X) == 0:
            return np.zeros(0)
        total = np.zeros(len(X))
        for tree in self.trees:
            total += tree.predict(X)
        return np.clip(total / len(self.trees), self.floor, self.ceiling)

    def to_dict(self) -> dict:
        return {
            "format": ENSEMBLE_FORMAT, "version": ENSEMBLE_VERSION, "schema_hash": self.schema,
            "features": self.features, "params": asdict(self.params), "seed": self.seed,
            "floor": self.floor, "ceiling": self.ceiling,
            "trees": [{k: getattr(t, k).tolist() for k in ("left", "right", "feature", "threshold", "value")}
                      for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TreeEnsembleRegressor":
        if d.get("format") != ENSEMBLE_FORMAT or d.get("version") != ENSEMBLE_VERSION:
            raise SchemaError(f"not a {ENSEMBLE_FORMAT} v{ENSEMBLE_VERSION} model")
        model = cls(list(d["features"]), EnsembleParams(**d["params"]), d["seed"],
                    [_ArrayTree(*(np.asarray(t[k], dtype=np.int64 if k in ("left", "right", "feature") else float)
                                  for k in ("left", "right", "feature", "threshold", "value")))
                     for t in d["trees"]],
                    float(d["floor"]), float(d["ceiling"]))
        if model.schema != d["schema_hash"]:
            raise SchemaError("schema hash mismatch")
        return model


@dataclass
class GroupedRegressor:
    models: dict[str, TreeEnsembleRegressor]
    fallback: Optional[TreeEnsembleRegressor] = None
    group_column: str = "demand_type"

    def predict(self, rows: pd.DataFrame) -> np.ndarray:
        out = np.empty(len(rows))
        groups = rows[self.group_column].to_numpy()
        for g in pd.unique(groups):
            idx = np.flatnonzero(groups == g)
            model = self.models.get(g, self.fallback)
            if model is None:
                raise ValueError(f"no size model for demand type {g!r}")
            out[idx] = model.predict(rows.iloc[idx])
        return out


def fit_ensemble(rows: pd.DataFrame, scope: str = "global", params: EnsembleParams = EnsembleParams(),
                 seed: int = 0, min_group_rows: int = 20):
    """Fit R3 (``scope="global"``) or R2 (``scope="per_type"``) size models."""
    if len(rows) == 0:
        raise ValueError("cannot fit the size ensemble on an empty row set")
    if scope == "global":
        return TreeEnsembleRegressor(params=params, seed=seed).fit(rows)
    if scope != "per_type":
        raise ValueError(f"unknown scope {scope!r}")
    models = {}
    for g, part in rows.groupby("demand_type", sort=True):
        if len(part) >= min_group_rows:
            models[g] = TreeEnsembleRegressor(params=params, seed=seed).fit(part)
    fallback = TreeEnsembleRegressor(params=params, seed=seed).fit(rows)
    return GroupedRegressor(models, fallback)


def estimate_size(method: str, history=None, rows: Optional[pd.DataFrame] = None, model=None,
                  alpha: float = DEFAULT_ALPHA, rng_seed=None) -> float | np.ndarray:
    """Strictly positive size estimate for a flagged occurrence.

    Local methods read ``history`` (demand values; zeros are ignored); the
    ensemble reads ``rows`` with ``model``.
    """
    method = method.lower()
    if method in ("ensemble", "r2", "r3", "ml"):
        if model is None or rows is None:
            raise NoEstimateError("ensemble size estimate needs a fitted model and feature rows")
        return model.predict(rows)
    if history is None:
        raise NoEstimateError(f"{method} needs a demand history")
    try:
        if method == "naive":
            return naive_last(history)
        if method == "ma3":
            return ma3(history)
        if method == "mfv":
            return mfv(history)
        if method == "ses":
            return ses(history, alpha)
        if method == "rand":
            return rand_jitter(history, rng_seed)
    except NoForecastError as exc:
        raise NoEstimateError(str(exc)) from exc
    raise ValueError(f"unknown size method {method!r}")
