"""Report rendering: result-table CSVs, an aligned text table, the
results ledger, and figures."""

from __future__ import annotations

import os
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from .experiments import TABLE4_COLUMNS, EvaluationReport  # noqa: E402

FLOAT_FORMAT = "%.6f"
LEDGER_NAME = "results_ledger.csv"


def aligned_table(frame: pd.DataFrame, float_digits: int = 4) -> str:
    """Plain-text table with right-aligned numeric columns."""
    if frame.empty:
        return "(no rows)\n"

    def cell(v):
        if isinstance(v, (float, np.floating)):
            return "nan" if np.isnan(v) else f"{v:.{float_digits}f}"
        return str(v)

    cols = list(frame.columns)
    body = [[cell(v) for v in row] for row in frame.itertuples(index=False)]
    widths = [max(len(c), *(len(r[i]) for r in body)) for i, c in enumerate(cols)]
    numeric = [pd.api.types.is_numeric_dtype(frame[c]) for c in cols]

    def line(values):
        return "  ".join(v.rjust(w) if num else v.ljust(w) for v, w, num in zip(values, widths, numeric)).rstrip()

    out = [line(cols), line(["-" * w for w in widths])]
    out += [line(r) for r in body]
    return "\n".join(out) + "\n"


def write_csv(frame: pd.DataFrame, path: Path) -> None:
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def append_ledger(table4: pd.DataFrame, path: Path, run_id: str) -> None:
    """Append overall-result rows, tagged with ``run_id``, to a CSV results ledger."""
    rows = table4.assign(run_id=run_id)[["run_id", *TABLE4_COLUMNS]]
    header = not path.exists() or os.path.getsize(path) == 0
    with open(path, "a", encoding="utf-8", newline="") as fh:
        rows.to_csv(fh, index=False, header=header, float_format=FLOAT_FORMAT, lineterminator="\n")


def plot_auc(table4: pd.DataFrame, path: Path) -> None:
    ok = table4[table4["error"].fillna("") == ""]
    fig, ax = plt.subplots(figsize=(max(6, 0.5 * len(ok["experiment"].unique()) + 2), 4))
    horizons = sorted(ok["horizon_days"].unique())
    exps = list(dict.fromkeys(ok["experiment"]))
    x = np.arange(len(exps))
    width = 0.8 / max(len(horizons), 1)
    for j, h in enumerate(horizons):
        part = ok[ok["horizon_days"] == h].set_index("experiment")
        vals = [part["auc_roc"].get(e, np.nan) for e in exps]
        ax.bar(x + j * width, vals, width, label=f"{h} days")
    ax.axhline(0.5, color="grey", lw=0.8, ls="--")
    ax.set_xticks(x + width * (len(horizons) - 1) / 2)
    ax.set_xticklabels(exps, rotation=60, ha="right", fontsize=8)
    ax.set_ylabel("AUC ROC")
    ax.set_ylim(0, 1)
    ax.legend(title="horizon")
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)


def plot_mase(table4: pd.DataFrame, path: Path) -> None:
    ok = table4[table4["error"].fillna("") == ""]
    fig, ax = plt.subplots(figsize=(5, 5))
    for h, part in ok.groupby("horizon_days"):
        ax.scatter(part["mase_I"], part["mase_II"], label=f"{h} days", s=20)
        for _, r in part.iterrows():
            ax.annotate(r["experiment"], (r["mase_I"], r["mase_II"]), fontsize=6)
    lim = np.nanmax(ok[["mase_I", "mase_II"]].to_numpy(dtype=float)) if len(ok) else 1.0
    lim = 1.0 if not np.isfinite(lim) else lim * 1.05
    ax.plot([0, lim], [0, lim], color="grey", lw=0.8, ls="--")
    ax.set_xlabel("MASE_I (sizes at true demand dates)")
    ax.set_ylabel("MASE_II (combined forecast)")
    ax.legend(title="horizon")
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)


def write_report(report: EvaluationReport, out_dir, run_id: str = "run", figures: bool = True) -> dict:
    """Write ``table4.csv``, ``table5.csv``, ``report.txt`` and figures into ``out_dir``.

    Returns the written paths by name.  The results ledger is appended,
    never rewritten.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"table4": out / "table4.csv", "table5": out / "table5.csv", "text": out / "report.txt",
             "ledger": out / LEDGER_NAME}
    write_csv(report.table4, paths["table4"])
    write_csv(report.table5, paths["table5"])
    text = ["Overall results", aligned_table(report.table4.drop(columns=["tp", "fp", "fn", "tn"])),
            "AUC ROC per demand type", aligned_table(report.table5)]
    paths["text"].write_text("\n".join(text), encoding="utf-8")
    append_ledger(report.table4, paths["ledger"], run_id)
    if figures and not report.table4.empty:
        paths["auc_figure"] = out / "auc_by_experiment.png"
        paths["mase_figure"] = out / "mase_I_vs_II.png"
        plot_auc(report.table4, paths["auc_figure"])
        plot_mase(report.table4, paths["mase_figure"])
    return paths
