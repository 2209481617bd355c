"""CSV ingestion and output, run configuration, and model files."""

from __future__ import annotations

import csv
import dataclasses
import datetime as dt
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import yaml

from .core import DemandDataError, DemandRecord, DemandSeries, SeriesForecast, build_series, span_of
from .occurrence import BoostedClassifier, BoostingParams, GroupedClassifier
from .occurrence.boosting import SchemaError
from .occurrence.hybrid import HybridParams
from .size import EnsembleParams, GroupedRegressor, TreeEnsembleRegressor

DEMAND_HEADER = ["date", "material", "client", "quantity"]
FORECAST_HEADER = ["date", "material", "client", "score", "flag", "size", "combined"]
GROUPED_FORMAT = "twofold.grouped"
ENV_PREFIX = "TWOFOLD_"


class CSVFormatError(DemandDataError):
    """Header or row problems; ``rejects`` lists ``(line_number, reason)``."""

    def __init__(self, message: str, rejects: Sequence[tuple[int, str]] = ()):
        self.rejects = list(rejects)
        super().__init__(message)


class ConfigError(ValueError):
    pass


# --- demand CSV ---------------------------------------------------------------


def read_demand_csv(path) -> tuple[list[DemandRecord], list[tuple[int, str]]]:
    """Parse every row; returns the valid records and ``(line, reason)`` for the rest."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    records, rejects = [], []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != DEMAND_HEADER:
            raise CSVFormatError(f"{path}: header must be {','.join(DEMAND_HEADER)}, got {header}")
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 4:
                rejects.append((line, f"expected 4 fields, got {len(row)}"))
                continue
            date_s, material, client, qty_s = (c.strip() for c in row)
            try:
                date = dt.date.fromisoformat(date_s)
            except ValueError:
                rejects.append((line, f"bad date {date_s!r}"))
                continue
            try:
                qty = float(qty_s)
            except ValueError:
                rejects.append((line, f"bad quantity {qty_s!r}"))
                continue
            if not math.isfinite(qty) or qty < 0:
                rejects.append((line, f"quantity must be a finite number >= 0, got {qty_s!r}"))
                continue
            if not material or not client:
                rejects.append((line, "empty material or client"))
                continue
            records.append(DemandRecord(date, material, client, qty))
    return records, rejects


def load_csv(path, skip_invalid: bool = False) -> list[DemandRecord]:
    """Demand records from a ``date,material,client,quantity`` file.

    Invalid rows raise :class:`CSVFormatError` naming every bad line,
    unless ``skip_invalid`` is set.
    """
    records, rejects = read_demand_csv(path)
    if rejects and not skip_invalid:
        lines = "; ".join(f"line {n}: {why}" for n, why in rejects[:20])
        raise CSVFormatError(f"{path}: {len(rejects)} invalid row(s): {lines}", rejects)
    return records


def _fmt_qty(q: float) -> str:
    return str(int(q)) if float(q).is_integer() and abs(q) < 2 ** 53 else repr(float(q))


def write_demand_csv(records: Iterable[DemandRecord], path) -> None:
    rows = sorted(records, key=lambda r: (r.date, r.material_id, r.client_id))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DEMAND_HEADER)
        for r in rows:
            w.writerow([r.date.isoformat(), r.material_id, r.client_id, _fmt_qty(r.quantity)])


def series_from_csv(path, skip_invalid: bool = False) -> list[DemandSeries]:
    """Zero-filled daily series over the file's overall date span."""
    records = load_csv(path, skip_invalid)
    if not records:
        return []
    start, end = span_of(records)
    return build_series(records, start, end)


def series_records(series: Iterable[DemandSeries]) -> list[DemandRecord]:
    return [r for s in series for r in s.to_records()]


def write_forecast_csv(forecasts: Iterable[SeriesForecast], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FORECAST_HEADER)
        for f in sorted(forecasts, key=lambda f: f.key):
            for d, s, fl, z, c in zip(f.dates, f.score, f.flag, f.size, f.combined):
                w.writerow([str(d), f.key[0], f.key[1], f"{s:.10g}", int(fl), f"{z:.10g}", f"{c:.10g}"])


# --- configuration ------------------------------------------------------------


@dataclass
class RunConfig:
    """Flat run settings.  Every key can be overridden by an environment
    variable ``TWOFOLD_<KEY>`` holding a YAML scalar or list."""

    horizons: list[int] = field(default_factory=lambda: [14, 56])
    experiments: list[str] = field(default_factory=list)
    alpha: float = 0.1
    beta: float = 0.1
    threshold: float = 0.5
    seed: int = 0
    train_window_days: Optional[int] = 365
    alpha_grid: Optional[list[float]] = None
    test_months: int = 6
    n_folds: int = 6
    boosting_rounds: int = 200
    boosting_learning_rate: float = 0.1
    boosting_max_depth: int = 6
    focal_gamma: float = 2.0
    reg_lambda: float = 1.0
    max_bins: int = 255
    ensemble_trees: int = 300
    ensemble_max_depth: Optional[int] = 12
    hybrid_hidden: int = 5
    hybrid_epochs: int = 500
    synthetic_n_series: int = 516
    synthetic_span_days: int = 1095
    synthetic_start_date: str = "2019-01-07"
    synthetic_lumpy_fraction: float = 0.095
    synthetic_seed: int = 0
    figures: bool = True

    def validate(self) -> "RunConfig":
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(isinstance(self.horizons, list) and self.horizons and all(
            isinstance(h, int) and h >= 1 for h in self.horizons), "horizons must be a list of positive integers")
        need(isinstance(self.experiments, list) and all(isinstance(e, str) for e in self.experiments),
             "experiments must be a list of ids")
        need(0 < self.alpha < 1 and 0 < self.beta < 1, "alpha and beta must lie in (0, 1)")
        need(0 < self.threshold < 1, "threshold must lie in (0, 1)")
        need(isinstance(self.seed, int) and self.seed >= 0, "seed must be a non-negative integer")
        need(self.train_window_days is None or self.train_window_days >= 7, "train_window_days must be >= 7")
        need(self.alpha_grid is None or (isinstance(self.alpha_grid, list) and self.alpha_grid
                                         and all(0 < a < 1 for a in self.alpha_grid)),
             "alpha_grid must be a non-empty list of values in (0, 1)")
        need(1 <= self.test_months <= 24 and 1 <= self.n_folds <= 60, "test_months/n_folds out of range")
        need(1 <= self.boosting_rounds <= 10000, "boosting_rounds must lie in [1, 10000]")
        need(0 < self.boosting_learning_rate <= 1, "boosting_learning_rate must lie in (0, 1]")
        need(1 <= self.boosting_max_depth <= 12, "boosting_max_depth must lie in [1, 12]")
        need(self.focal_gamma >= 0, "focal_gamma must be >= 0")
        need(self.reg_lambda >= 0, "reg_lambda must be >= 0")
        need(2 <= self.max_bins <= 255, "max_bins must lie in [2, 255]")
        need(1 <= self.ensemble_trees <= 5000, "ensemble_trees must lie in [1, 5000]")
        need(self.ensemble_max_depth is None or self.ensemble_max_depth >= 1, "ensemble_max_depth must be >= 1")
        need(self.hybrid_hidden >= 1 and self.hybrid_epochs >= 1, "hybrid sizes must be positive")
        need(self.synthetic_n_series >= 1 and self.synthetic_span_days >= 14, "synthetic size out of range")
        need(0 <= self.synthetic_lumpy_fraction <= 1, "synthetic_lumpy_fraction must lie in [0, 1]")
        try:
            dt.date.fromisoformat(str(self.synthetic_start_date))
        except ValueError:
            raise ConfigError("synthetic_start_date must be YYYY-MM-DD") from None
        return self

    def boosting_params(self) -> BoostingParams:
        return BoostingParams(n_rounds=self.boosting_rounds, learning_rate=self.boosting_learning_rate,
                              max_depth=self.boosting_max_depth, focal_gamma=self.focal_gamma,
                              reg_lambda=self.reg_lambda, max_bins=self.max_bins)

    def ensemble_params(self) -> EnsembleParams:
        return EnsembleParams(n_trees=self.ensemble_trees, max_depth=self.ensemble_max_depth)

    def hybrid_params(self) -> HybridParams:
        return HybridParams(hidden=self.hybrid_hidden, epochs=self.hybrid_epochs)


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _coerce(name: str, value):
    default = getattr(RunConfig(), name)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{name} must be true or false")
        return value
    if isinstance(default, float) and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if name == "synthetic_start_date" and isinstance(value, dt.date):
        return value.isoformat()
    if name == "alpha_grid" and isinstance(value, list):
        return [float(v) for v in value]
    return value


def load_config(path=None, environ: Optional[dict] = None) -> RunConfig:
    """Read a flat YAML mapping, apply ``TWOFOLD_*`` overrides, and range-check."""
    values: dict = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a key-value mapping")
        values.update(data)
    env = os.environ if environ is None else environ
    for key, raw in env.items():
        if key.startswith(ENV_PREFIX):
            name = key[len(ENV_PREFIX):].lower()
            if name in _FIELDS:
                values[name] = yaml.safe_load(raw)
    unknown = sorted(set(values) - set(_FIELDS))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    try:
        cfg = RunConfig(**{k: _coerce(k, v) for k, v in values.items()})
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    for name, f in _FIELDS.items():
        v = getattr(cfg, name)
        if isinstance(getattr(RunConfig(), name), (int, float)) and not isinstance(v, (int, float)):
            raise ConfigError(f"{name} must be numeric, got {v!r}")
    return cfg.validate()


# --- model files ----------------------------------------------------------------


def model_to_dict(model) -> dict:
    if isinstance(model, (BoostedClassifier, TreeEnsembleRegressor)):
        return model.to_dict()
    if isinstance(model, (GroupedClassifier, GroupedRegressor)):
        return {
            "format": GROUPED_FORMAT, "version": 1,
            "kind": "classifier" if isinstance(model, GroupedClassifier) else "regressor",
            "group_column": model.group_column,
            "models": {k: m.to_dict() for k, m in sorted(model.models.items())},
            "fallback": model.fallback.to_dict() if model.fallback is not None else None,
        }
    raise TypeError(f"cannot persist {type(model).__name__}")


def model_from_dict(d: dict):
    fmt = d.get("format")
    if fmt == GROUPED_FORMAT:
        inner = model_from_dict
        models = {k: inner(v) for k, v in d["models"].items()}
        fallback = inner(d["fallback"]) if d.get("fallback") else None
        if d["kind"] == "classifier":
            feats = next(iter(models.values()), fallback).features
            return GroupedClassifier(models, fallback, d["group_column"], list(feats))
        return GroupedRegressor(models, fallback, d["group_column"])
    if fmt == "twofold.boosted":
        return BoostedClassifier.from_dict(d)
    if fmt == "twofold.ensemble":
        return TreeEnsembleRegressor.from_dict(d)
    raise SchemaError(f"unknown model format {fmt!r}")


def save_model(model, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, separators=(",", ":"))


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
