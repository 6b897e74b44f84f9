"""Localized (gamma, w, c) sweep over the CHASE selector with backbones shared per fold."""

from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd

from ..config import ExperimentConfig
from ..errors import ConfigError
from ..logs import get_logger
from ..metrics import OVERALL
from .dispatcher import FoldDispatcher, FoldJob
from .experiment import evaluate_fold, load_table, plan_splits
from .pipeline import coverage_key, fit_method, prepare_fold, train_base_models
from .report import DASH, write_csv

_LOGGER = get_logger(__name__)

SWEEP_CSV = "sweep.csv"
SWEEP_TABLE = "sweep.md"
GridRow = Tuple[int, int, int]


def sweep_columns(coverages: Sequence[float]) -> List[str]:
    """NA, then risk, three-way accuracy and abstain alignment at every coverage."""

    columns = ["NA"]
    for short in ("R", "3W", "AA"):
        columns.extend(f"{short}@{coverage:.2f}" for coverage in coverages)
    return columns


def _cell_metrics(reports, coverages: Sequence[float]) -> Dict[str, Optional[float]]:
    first = reports[coverage_key(coverages[0])][OVERALL]
    values: Dict[str, Optional[float]] = {"NA": first.no_abstain_acc}
    for short, attribute in (("R", "risk_at_coverage"), ("3W", "three_way_acc"), ("AA", "abstain_alignment")):
        for coverage in coverages:
            values[f"{short}@{coverage:.2f}"] = getattr(reports[coverage_key(coverage)][OVERALL], attribute)
    return values


def run_sweep(
    config: ExperimentConfig, grid: Sequence[GridRow] | None = None, out_dir: Path | None = None
) -> pd.DataFrame:
    """One row per grid cell (g, w, c in percent) with fold-mean metrics on the overall test set."""

    grid = list(grid if grid is not None else config.run.sweep_grid)
    if not grid:
        raise ConfigError("The sweep grid is empty.")
    out_dir = Path(out_dir or config.run.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    coverages = config.run.coverages

    table, _, _ = load_table(config, out_dir)
    splits = {split.fold: split for split in plan_splits(table, config)}

    def _fold(fold: int) -> List[dict]:
        data = prepare_fold(table, splits[fold], config.run.std_floor)
        base = train_base_models(["CHASE"], data, config)
        rows = []
        for g, w, c in grid:
            weights = config.selector.model_copy(update={"gamma": g / 100, "w": w / 100, "c": c / 100})
            method = fit_method("CHASE", base, data, config, weights)
            _, reports = evaluate_fold({"CHASE": method}, base, data, config)
            rows.append({"g": g, "w": w, "c": c, "fold": fold, **_cell_metrics(reports["CHASE"], coverages)})
        return rows

    jobs = [FoldJob(fold=fold) for fold in splits]
    outcomes = FoldDispatcher(_fold, workers=config.run.workers).run(jobs)
    per_fold = pd.DataFrame([row for rows in outcomes.values() if rows for row in rows])
    if per_fold.empty:
        raise ConfigError("Every sweep fold failed.")

    columns = sweep_columns(coverages)
    per_fold[columns] = per_fold[columns].apply(pd.to_numeric, errors="coerce")
    table_frame = per_fold.groupby(["g", "w", "c"], sort=False)[columns].mean().reset_index()
    write_csv(table_frame, out_dir / SWEEP_CSV)
    (out_dir / SWEEP_TABLE).write_text(render_sweep(table_frame, columns), encoding="utf-8")
    _LOGGER.info("Sweep over %d cell(s) written to %s", len(table_frame), out_dir / SWEEP_CSV)
    return table_frame


def render_sweep(frame: pd.DataFrame, columns: Sequence[str]) -> str:
    lines = ["| g | w | c | " + " | ".join(columns) + " |", "|---|---|---|" + "---|" * len(columns)]
    for _, row in frame.iterrows():
        cells = [DASH if pd.isna(row[name]) else f"{100 * row[name]:.2f}" for name in columns]
        lines.append(f"| {int(row['g'])} | {int(row['w'])} | {int(row['c'])} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"
