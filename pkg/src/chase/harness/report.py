"""Metric tables, significance markers and risk-coverage plots written by every run."""

from __future__ import annotations

from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import matplotlib
import numpy as np
import pandas as pd
from matplotlib.figure import Figure

from ..config import BASELINE_METHODS
from ..errors import UndefinedMetricError
from ..metrics import SUBSETS, MetricReport, ScoredPredictions, risk_coverage_curve, wilcoxon_one_sided

METRICS_FILE = "metrics.csv"
PREDICTIONS_FILE = "predictions.csv"
SUMMARY_CSV = "summary.csv"
SUMMARY_TABLE = "summary.md"
CURVE_FILE = "risk_coverage.svg"
SIGNIFICANCE = 0.05
DASH = "—"
DAGGER = "†"

# short name -> (MetricReport field, higher is better)
METRICS: Dict[str, Tuple[str, Optional[bool]]] = {
    "NA": ("no_abstain_acc", True),
    "R": ("risk_at_coverage", False),
    "3W": ("three_way_acc", True),
    "AA": ("abstain_alignment", True),
    "coverage": ("realized_coverage", None),
}
COLUMNS = ["method", "fold", "coverage", "metric", "value"]


def metric_name(short: str, subset: str) -> str:
    return f"{short}({subset})"


def fold_rows(method: str, fold: int, coverage: float, reports: Mapping[str, MetricReport]) -> List[dict]:
    rows = []
    for subset in SUBSETS:
        report = reports[subset]
        for short, (attribute, _) in METRICS.items():
            rows.append(
                {
                    "method": method,
                    "fold": fold,
                    "coverage": coverage,
                    "metric": metric_name(short, subset),
                    "value": getattr(report, attribute),
                }
            )
    return rows


def metrics_frame(rows: Iterable[dict]) -> pd.DataFrame:
    frame = pd.DataFrame(list(rows), columns=COLUMNS)
    frame["value"] = pd.to_numeric(frame["value"], errors="coerce")
    return frame


def write_csv(frame: pd.DataFrame, path: Path) -> Path:
    """Fixed float format and empty cells for undefined values keep reruns byte-identical."""

    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.6f", na_rep="", lineterminator="\n")
    return path


def read_metrics(path: Path) -> pd.DataFrame:
    return metrics_frame(pd.read_csv(path).to_dict("records"))


def _direction(metric: str) -> Optional[bool]:
    return METRICS[metric.split("(")[0]][1]


def _paired(frame: pd.DataFrame, method: str, other: str) -> Tuple[np.ndarray, np.ndarray]:
    left = frame[frame["method"] == method].set_index("fold")["value"]
    right = frame[frame["method"] == other].set_index("fold")["value"]
    joined = pd.concat([left, right], axis=1, keys=["a", "b"]).dropna()
    return joined["a"].to_numpy(), joined["b"].to_numpy()


def summary_frame(metrics: pd.DataFrame, focus: str = "CHASE") -> pd.DataFrame:
    """mean / std per (method, coverage, metric), plus a one-sided Wilcoxon p-value of
    ``focus`` against the strongest baseline (best mean) of each metric and coverage."""

    grouped = metrics.groupby(["method", "coverage", "metric"], sort=False)["value"]
    summary = grouped.agg(mean="mean", std="std", n="count").reset_index()
    summary["std"] = summary["std"].fillna(0.0)
    summary["p_value"] = np.nan
    summary["versus"] = ""

    baselines = [name for name in BASELINE_METHODS if name in set(metrics["method"])]
    if focus not in set(metrics["method"]) or not baselines:
        return summary

    for (coverage, metric), cell in metrics.groupby(["coverage", "metric"], sort=False):
        higher = _direction(metric)
        if higher is None:
            continue
        means = cell[cell["method"].isin(baselines)].groupby("method")["value"].mean().dropna()
        if means.empty:
            continue
        strongest = means.idxmax() if higher else means.idxmin()
        ours, theirs = _paired(cell, focus, strongest)
        if ours.size == 0:
            continue
        diffs = ours - theirs if higher else theirs - ours
        try:
            p_value = wilcoxon_one_sided(diffs)
        except UndefinedMetricError:
            continue
        row = (summary["method"] == focus) & (summary["coverage"] == coverage) & (summary["metric"] == metric)
        summary.loc[row, "p_value"] = p_value
        summary.loc[row, "versus"] = strongest
    return summary


def _cell(mean: float, std: float, p_value: float) -> str:
    if pd.isna(mean):
        return DASH
    text = f"{100 * mean:.2f}±{100 * std:.2f}"
    if not pd.isna(p_value) and p_value < SIGNIFICANCE:
        text += DAGGER
    return text


def render_table(summary: pd.DataFrame, metrics: Sequence[str] | None = None) -> str:
    """Markdown table: one row per (coverage, method), one column per metric, values in %."""

    default = [metric_name(short, subset) for short in ("NA", "R", "3W", "AA") for subset in SUBSETS]
    metrics = list(metrics or default)
    lines = [
        "| coverage | method | " + " | ".join(metrics) + " |",
        "|---|---|" + "---|" * len(metrics),
    ]
    for coverage in sorted(summary["coverage"].unique()):
        block = summary[summary["coverage"] == coverage]
        for method in dict.fromkeys(block["method"]):
            rows = block[block["method"] == method].set_index("metric")
            cells = [
                _cell(rows.at[name, "mean"], rows.at[name, "std"], rows.at[name, "p_value"])
                if name in rows.index
                else DASH
                for name in metrics
            ]
            lines.append(f"| {coverage:.2f} | {method} | " + " | ".join(cells) + " |")
    lines.append("")
    lines.append(
        f"{DAGGER} one-sided Wilcoxon p < {SIGNIFICANCE} against the strongest baseline; {DASH} undefined."
    )
    return "\n".join(lines) + "\n"


def prediction_rows(method: str, fold: int, ids: np.ndarray, scored: ScoredPredictions) -> List[dict]:
    return [
        {
            "method": method,
            "fold": fold,
            "id": sequence_id,
            "label": int(label),
            "ambiguous": int(flag),
            "prediction": int(prediction),
            "score": float(score),
        }
        for sequence_id, label, flag, prediction, score in zip(
            ids, scored.labels, scored.ambiguous, scored.prediction, scored.scores
        )
    ]


def curves_from_predictions(predictions: pd.DataFrame) -> Dict[str, Tuple[np.ndarray, np.ndarray]]:
    """Risk-coverage curve per method, pooled over test folds."""

    curves = {}
    for method, rows in predictions.groupby("method", sort=False):
        scored = ScoredPredictions(
            rows["prediction"].to_numpy(),
            rows["label"].to_numpy(),
            rows["ambiguous"].to_numpy().astype(bool),
            rows["score"].to_numpy(dtype=np.float64),
        )
        curves[method] = risk_coverage_curve(scored)
    return curves


def plot_risk_coverage(curves: Mapping[str, Tuple[np.ndarray, np.ndarray]], path: Path) -> Path:
    with matplotlib.rc_context({"svg.hashsalt": "chase"}):
        figure = Figure(figsize=(6.0, 4.0))
        axis = figure.add_subplot()
        for method, (coverage, risk) in curves.items():
            axis.plot(coverage, 100.0 * risk, label=method, linewidth=1.4)
        axis.set_xlabel("coverage")
        axis.set_ylabel("risk (%)")
        axis.set_xlim(0.0, 1.0)
        axis.set_ylim(bottom=0.0)
        axis.grid(alpha=0.3)
        axis.legend(frameon=False)
        figure.tight_layout()
        path.parent.mkdir(parents=True, exist_ok=True)
        figure.savefig(path, format="svg", metadata={"Date": None})
    return path


def write_report(out_dir: Path, metrics: pd.DataFrame, predictions: pd.DataFrame | None = None) -> pd.DataFrame:
    """Summary CSV, markdown table and (when predictions exist) the risk-coverage SVG."""

    summary = summary_frame(metrics)
    write_csv(summary, out_dir / SUMMARY_CSV)
    (out_dir / SUMMARY_TABLE).write_text(render_table(summary), encoding="utf-8")
    if predictions is not None and not predictions.empty:
        plot_risk_coverage(curves_from_predictions(predictions), out_dir / CURVE_FILE)
    return summary
