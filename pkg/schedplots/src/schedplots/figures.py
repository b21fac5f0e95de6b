"""Render experiment CSVs as line plots with standard-deviation bands.

The input schema is the one the ``barsched figure`` command writes; this module
never recomputes anything beyond grouping the raw trial rows into per-curve
means and sample standard deviations, so the simulator stays the single source
of numeric truth.  Every render also writes a ``.coords.txt`` sidecar holding
the exact plotted coordinates, which makes the output diffable: the sidecar is
a pure function of the CSV.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import pandas as pd

REQUIRED_COLUMNS = (
    "figure",
    "algorithm",
    "params",
    "x",
    "trial",
    "seed",
    "alg_cost",
    "opt_cost",
    "ratio",
    "timing_err",
    "inversion_err",
    "l1_err",
)

_NUMERIC_COLUMNS = ("x", "ratio")

# kind -> (x label, y label, title)
FIGURE_KINDS = {
    "noise": (
        "prediction noise scale",
        "competitive ratio",
        "Ratio vs prediction noise, one curve per trust setting",
    ),
    "robustness": (
        "prediction noise scale",
        "competitive ratio",
        "Robustified schedulers under growing noise",
    ),
    "granularity": (
        "progress-bar granularity",
        "competitive ratio",
        "Commit rules vs progress-bar granularity",
    ),
}


class PlotInputError(ValueError):
    """The CSV (or the request itself) cannot be turned into a figure."""


@dataclass(frozen=True)
class FigureSpec:
    csv_path: str
    kind: str
    out_path: str
    log_x: bool = False


def load_trials(csv_path: str) -> pd.DataFrame:
    """Read and validate raw trial rows; everything stays text except x/ratio."""
    try:
        frame = pd.read_csv(csv_path, dtype=str, keep_default_na=False)
    except FileNotFoundError:
        raise PlotInputError(f"no such csv: {csv_path}") from None
    except pd.errors.ParserError as exc:
        raise PlotInputError(f"csv does not parse: {exc}") from None
    for col in REQUIRED_COLUMNS:
        if col not in frame.columns:
            raise PlotInputError(f"schema mismatch: missing column '{col}'")
    if frame.empty:
        raise PlotInputError("csv has no trial rows")
    for col in _NUMERIC_COLUMNS:
        try:
            frame[col] = pd.to_numeric(frame[col])
        except ValueError:
            raise PlotInputError(
                f"schema mismatch: column '{col}' is not numeric"
            ) from None
    return frame


def curve_points(frame: pd.DataFrame) -> pd.DataFrame:
    """Mean and sample std of the ratio per (algorithm, x) cell.

    A cell with a single trial gets std 0 so a sparse CSV still renders.
    """
    table = (
        frame.groupby(["algorithm", "x"], sort=True)["ratio"]
        .agg(["mean", "std"])
        .reset_index()
    )
    table["std"] = table["std"].fillna(0.0)
    return table


def curve_labels(frame: pd.DataFrame) -> dict[str, str]:
    """Legend label per algorithm from the params tokens all its rows share.

    Some harness arms record sweep-dependent settings in params (the stochastic
    preset stores the granularity and the tuned commit jump there), so tokens
    that vary along the curve are dropped from the label — they belong on the
    x axis, not in the legend.
    """
    labels: dict[str, str] = {}
    for alg, sub in frame.groupby("algorithm", sort=True):
        token_lists = [str(p).split(";") for p in sub["params"]]
        shared = set(token_lists[0]).intersection(*token_lists[1:])
        kept = [tok for tok in token_lists[0] if tok in shared]
        labels[str(alg)] = f"{alg} ({';'.join(kept)})" if kept else str(alg)
    return labels


def sidecar_path(out_path: str) -> str:
    root, _ = os.path.splitext(out_path)
    return root + ".coords.txt"


def write_sidecar(table: pd.DataFrame, path: str) -> None:
    lines = ["algorithm\tx\tmean\tstd"]
    for row in table.itertuples(index=False):
        lines.append(
            "%s\t%.10g\t%.10g\t%.10g" % (row.algorithm, row.x, row.mean, row.std)
        )
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")


def render(spec: FigureSpec) -> str:
    """Write the figure image plus its coordinate sidecar; returns the image path."""
    if spec.kind not in FIGURE_KINDS:
        raise PlotInputError(f"unknown figure kind: {spec.kind}")
    frame = load_trials(spec.csv_path)
    table = curve_points(frame)
    labels = curve_labels(frame)
    x_label, y_label, title = FIGURE_KINDS[spec.kind]

    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for alg, sub in table.groupby("algorithm", sort=True):
        sub = sub.sort_values("x")
        xs = sub["x"].to_numpy()
        means = sub["mean"].to_numpy()
        stds = sub["std"].to_numpy()
        (line,) = ax.plot(xs, means, marker="o", markersize=4, label=labels[str(alg)])
        ax.fill_between(xs, means - stds, means + stds, alpha=0.2, color=line.get_color())
    if spec.log_x:
        ax.set_xscale("log")
    ax.set_xlabel(x_label)
    ax.set_ylabel(y_label)
    ax.set_title(title)
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(spec.out_path, dpi=150)
    plt.close(fig)

    write_sidecar(table, sidecar_path(spec.out_path))
    return spec.out_path
