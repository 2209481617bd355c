"""Command-line entry point: generate, classify, forecast, evaluate."""

from __future__ import annotations

import argparse
import datetime as dt
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from .core import DemandDataError
from .evaluation.experiments import TABLE4_IDS, ExperimentSpec, parse_experiment_id, run_matrix
from .evaluation.report import write_csv, write_report
from .evaluation.splits import SplitPlan
from .evaluation.synthetic import SyntheticSpec, generate_synthetic
from .io import RunConfig, load_config, series_from_csv, series_records, write_demand_csv, write_forecast_csv
from .pipeline import BaselineConfig, TwoFoldForecaster, demand_types, forecast_baseline
from .taxonomy import UndefinedPatternError, classify

DEFAULT_MATRIX = (*TABLE4_IDS, "CROSTON", "SBA", "TSB")


class CLIError(Exception):
    pass


def _spec_for(exp_id: str, horizon: int, cfg: RunConfig) -> ExperimentSpec:
    return ExperimentSpec(
        exp_id, horizon, seed=cfg.seed, alpha=cfg.alpha, beta=cfg.beta, threshold=cfg.threshold,
        train_window_days=cfg.train_window_days,
        alpha_grid=tuple(cfg.alpha_grid) if cfg.alpha_grid else None,
        boosting=cfg.boosting_params(), ensemble=cfg.ensemble_params(), hybrid=cfg.hybrid_params())


def _series(path):
    series = series_from_csv(path)
    if not series:
        raise CLIError(f"{path}: no demand rows")
    return series


# --- subcommands ----------------------------------------------------------------


def cmd_generate(args, cfg: RunConfig) -> dict:
    spec = SyntheticSpec(
        n_series=cfg.synthetic_n_series, span_days=cfg.synthetic_span_days,
        start_date=dt.date.fromisoformat(cfg.synthetic_start_date),
        lumpy_fraction=cfg.synthetic_lumpy_fraction, seed=cfg.synthetic_seed)
    data = generate_synthetic(spec)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_demand_csv(series_records(data.series), out)
    labels_path = Path(args.labels) if args.labels else out.with_name(out.stem + "_labels.csv")
    labels = data.labels.assign(date=pd.to_datetime(data.labels["date"]).dt.strftime("%Y-%m-%d"))
    write_csv(labels, labels_path)
    params_path = out.with_name(out.stem + "_params.csv")
    write_csv(data.params, params_path)
    return {"demand": str(out), "labels": str(labels_path), "params": str(params_path),
            "n_series": len(data.series)}


def cmd_classify(args, cfg: RunConfig) -> dict:
    rows = []
    for s in _series(args.input):
        try:
            p = classify(s)
            rows.append({"material": s.key[0], "client": s.key[1], "adi": p.adi, "cv2": p.cv2,
                         "quadrant": p.quadrant.value, "schema2": p.schema2.value})
        except UndefinedPatternError:
            rows.append({"material": s.key[0], "client": s.key[1], "adi": np.nan, "cv2": np.nan,
                         "quadrant": "Undefined", "schema2": "Undefined"})
    write_csv(pd.DataFrame(rows), Path(args.out))
    return {"out": args.out, "n_series": len(rows)}


def cmd_forecast(args, cfg: RunConfig) -> dict:
    """Forecast the weekdays after the data, up to the horizon.

    Models fit on data before ``last day + 1 - horizon`` so every target
    sits a full horizon after the newest training day.
    """
    series = _series(args.input)
    h = args.horizon
    last = max(s.end_date for s in series)
    first = last + dt.timedelta(days=1)
    data_end = first - dt.timedelta(days=h)
    targets = np.arange(np.datetime64(first, "D"), np.datetime64(last, "D") + h + 1)
    targets = targets[np.is_busday(targets)]
    spec = _spec_for(args.experiment, h, cfg)
    kind, classifier, _ = parse_experiment_id(spec.id)
    if classifier == "oracle":
        raise CLIError("the oracle classifier needs future actuals and cannot forecast")
    if kind == "baseline":
        forecasts = forecast_baseline(spec.baseline_config(), series, targets, data_end)
    else:
        model = TwoFoldForecaster(spec.pipeline_config(), demand_types(series, data_end))
        forecasts = model.fit(series, data_end).forecast(series, targets)
    write_forecast_csv(forecasts, Path(args.out))
    return {"out": args.out, "experiment": spec.id, "horizon_days": h, "data_end": str(data_end),
            "n_targets": int(len(targets))}


def cmd_evaluate(args, cfg: RunConfig) -> dict:
    series = _series(args.input)
    matrix = load_config(args.matrix) if args.matrix else cfg
    ids = matrix.experiments or list(DEFAULT_MATRIX)
    start = min(s.start_date for s in series)
    end = max(s.end_date for s in series)
    plan = SplitPlan(start, end, matrix.horizons[0], matrix.test_months, matrix.n_folds)
    specs = [_spec_for(i, matrix.horizons[0], matrix) for i in ids]
    report = run_matrix(specs, series, plan, tuple(matrix.horizons))
    paths = write_report(report, args.out, run_id=args.run_id, figures=matrix.figures)
    failed = report.table4.loc[report.table4["error"].fillna("") != "", "experiment"].tolist()
    return {"out": str(args.out), "files": {k: str(v) for k, v in paths.items()}, "failed": failed}


# --- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="twofold", description="Two-fold intermittent demand forecasting.")
    p.add_argument("--config", help="flat YAML run configuration (TWOFOLD_* env vars override it)")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic demand CSV plus oracle labels")
    g.add_argument("--spec", help="YAML with synthetic_* keys (overrides --config)")
    g.add_argument("--out", required=True)
    g.add_argument("--labels", help="label CSV path (default: <out>_labels.csv)")

    c = sub.add_parser("classify", help="ADI, CV2 and demand type per series")
    c.add_argument("--in", dest="input", required=True)
    c.add_argument("--out", required=True)

    f = sub.add_parser("forecast", help="forecast the weekdays after the data")
    f.add_argument("--in", dest="input", required=True)
    f.add_argument("--experiment", required=True, help="e.g. C2R1-SES, C1R3-ML, CROSTON")
    f.add_argument("--horizon", type=int, default=14)
    f.add_argument("--out", required=True)

    e = sub.add_parser("evaluate", help="run the experiment matrix over rolling folds")
    e.add_argument("--in", dest="input", required=True)
    e.add_argument("--matrix", help="YAML with experiments/horizons (default: the run config)")
    e.add_argument("--out", required=True, help="output directory")
    e.add_argument("--run-id", default="run")
    return p


COMMANDS = {"generate": cmd_generate, "classify": cmd_classify, "forecast": cmd_forecast,
            "evaluate": cmd_evaluate}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "generate" and args.spec:
            cfg = load_config(args.spec)
        else:
            cfg = load_config(args.config)
        if args.command == "forecast" and args.horizon < 1:
            raise CLIError("--horizon must be a positive number of days")
        summary = COMMANDS[args.command](args, cfg)
    except (CLIError, DemandDataError, ValueError, OSError, KeyError) as exc:
        record = {"status": "error", "command": args.command, "error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(record), file=sys.stderr)
        return 2
    print(json.dumps({"status": "ok", "command": args.command, **summary}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
