"""Cross-validated experiment: train, calibrate, score and report every method per fold."""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..config import ExperimentConfig
from ..errors import ConfigError
from ..logs import get_logger
from ..metrics import MetricReport, ScoredPredictions, evaluate_subsets
from ..simulator import SequenceTable, generate_dataset, read_dataset, write_dataset
from ..simulator.dataset import content_hash
from .dispatcher import FoldDispatcher, FoldJob
from .folds import FoldSplit, fixed_split, make_folds
from .persistence import (
    FoldArtifacts,
    FoldRecord,
    FoldTiming,
    RunManifest,
    load_fold,
    read_manifest,
    save_fold,
    write_manifest,
)
from .pipeline import (
    BaseModels,
    FittedMethod,
    FoldData,
    MethodState,
    coverage_key,
    fit_method,
    prepare_fold,
    score_split,
    train_base_models,
)
from .report import (
    METRICS_FILE,
    PREDICTIONS_FILE,
    fold_rows,
    metrics_frame,
    prediction_rows,
    write_csv,
    write_report,
)
from .variants import method_names

_LOGGER = get_logger(__name__)

RESCORED_FILE = "metrics_rescored.csv"
Reports = Dict[str, Dict[str, MetricReport]]


@dataclass
class FoldOutcome:
    fold: int
    methods: Dict[str, MethodState]
    scored: Dict[str, ScoredPredictions]
    reports: Dict[str, Reports]
    ids: np.ndarray
    timing: FoldTiming
    artifacts: Optional[FoldArtifacts] = None


@dataclass
class ExperimentResult:
    out_dir: Path
    names: Tuple[str, ...]
    jobs: List[FoldJob]
    outcomes: Dict[int, Optional[FoldOutcome]]
    metrics: pd.DataFrame
    summary: pd.DataFrame
    manifest: RunManifest

    @property
    def failed(self) -> List[int]:
        return [job.fold for job in self.jobs if job.status != "completed"]


def load_table(config: ExperimentConfig, out_dir: Path) -> Tuple[SequenceTable, Path, str]:
    """Read the configured dataset, or generate one into ``out_dir/data``."""

    if config.run.dataset_path is not None:
        records = read_dataset(config.run.dataset_path)
        path = Path(config.run.dataset_path)
        digest = content_hash(records)
    else:
        records, manifest = generate_dataset(config.simulator)
        path = write_dataset(records, manifest, Path(out_dir) / "data")
        digest = manifest.content_hash
    return SequenceTable.from_records(records), path, digest


def plan_splits(table: SequenceTable, config: ExperimentConfig) -> List[FoldSplit]:
    if config.run.split_mode == "fixed":
        return fixed_split(table)
    return make_folds(table, config.run.folds, config.run.seed, config.run.validation_fraction)


def evaluate_fold(
    fitted: Dict[str, FittedMethod], base: BaseModels, data: FoldData, config: ExperimentConfig
) -> Tuple[Dict[str, ScoredPredictions], Dict[str, Reports]]:
    """Score the test split with each method's stored thresholds."""

    scored: Dict[str, ScoredPredictions] = {}
    reports: Dict[str, Reports] = {}
    for name, method in fitted.items():
        scored[name] = score_split(method, base, data, "test", config)
        reports[name] = {
            coverage_key(coverage): evaluate_subsets(
                scored[name], method.state.thresholds[coverage_key(coverage)], coverage
            )
            for coverage in config.run.coverages
        }
    return scored, reports


def run_fold(
    split: FoldSplit, table: SequenceTable, config: ExperimentConfig, names: Sequence[str], out_dir: Path
) -> FoldOutcome:
    started = time.perf_counter()
    data = prepare_fold(table, split, config.run.std_floor)
    base = train_base_models(names, data, config)
    fitted = {name: fit_method(name, base, data, config) for name in names}
    trained = time.perf_counter()

    scored, reports = evaluate_fold(fitted, base, data, config)
    finished = time.perf_counter()
    timing = FoldTiming(
        train_seconds=trained - started,
        score_seconds=finished - trained,
        ms_per_sequence=1000.0 * (finished - trained) / max(1, len(data.test) * len(names)),
    )
    _LOGGER.info(
        "fold %d: train %.1fs, score %.2fs (%.3f ms/sequence)",
        split.fold,
        timing.train_seconds,
        timing.score_seconds,
        timing.ms_per_sequence,
    )
    artifacts = save_fold(out_dir, data, base, fitted) if config.run.save_checkpoints else None
    return FoldOutcome(
        fold=split.fold,
        methods={name: method.state for name, method in fitted.items()},
        scored=scored,
        reports=reports,
        ids=data.test.ids,
        timing=timing,
        artifacts=artifacts,
    )


def _tables(outcomes: Dict[int, Optional[FoldOutcome]], names: Sequence[str], config: ExperimentConfig):
    rows, predictions = [], []
    for fold, outcome in outcomes.items():
        if outcome is None:
            continue
        for name in names:
            for coverage in config.run.coverages:
                rows.extend(fold_rows(name, fold, coverage, outcome.reports[name][coverage_key(coverage)]))
            predictions.extend(prediction_rows(name, fold, outcome.ids, outcome.scored[name]))
    return metrics_frame(rows), pd.DataFrame(predictions)


def run_experiment(
    config: ExperimentConfig, names: Sequence[str] | None = None, out_dir: Path | None = None
) -> ExperimentResult:
    """Run every fold, write metrics / predictions / summary / plot / manifest to ``out_dir``."""

    names = tuple(names or method_names(config.run.methods, config.run.variants))
    if not names:
        raise ConfigError("Nothing to evaluate: no methods and no ablation variants configured.")
    out_dir = Path(out_dir or config.run.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    table, dataset_path, dataset_hash = load_table(config, out_dir)
    splits = plan_splits(table, config)
    _LOGGER.info("Evaluating %s over %d fold(s) of %d sequences", ", ".join(names), len(splits), len(table))

    by_fold = {split.fold: split for split in splits}
    jobs = [FoldJob(fold=split.fold) for split in splits]
    dispatcher = FoldDispatcher(
        lambda fold: run_fold(by_fold[fold], table, config, names, out_dir), workers=config.run.workers
    )
    outcomes = dispatcher.run(jobs)

    metrics, predictions = _tables(outcomes, names, config)
    write_csv(metrics, out_dir / METRICS_FILE)
    if not predictions.empty:
        write_csv(predictions, out_dir / PREDICTIONS_FILE)
    summary = write_report(out_dir, metrics, predictions)

    manifest = RunManifest(
        config=config.model_dump(mode="json"),
        config_hash=config.digest(),
        dataset_path=str(dataset_path),
        dataset_hash=dataset_hash,
        methods=list(names),
        seeds=list(config.run.seeds),
        split_mode=config.run.split_mode,
        folds=[_fold_record(job, outcomes.get(job.fold)) for job in jobs],
    )
    write_manifest(out_dir, manifest)
    result = ExperimentResult(out_dir, names, jobs, outcomes, metrics, summary, manifest)
    if result.failed:
        _LOGGER.error("%d fold(s) failed: %s", len(result.failed), result.failed)
    return result


def _fold_record(job: FoldJob, outcome: Optional[FoldOutcome]) -> FoldRecord:
    if outcome is None:
        return FoldRecord(fold=job.fold, status=job.status, error=job.error)
    return FoldRecord(
        fold=job.fold,
        status=job.status,
        timing=outcome.timing,
        artifacts=outcome.artifacts,
        thresholds={name: state.thresholds for name, state in outcome.methods.items()},
    )


def rescore_run(run_dir: Path, out_path: Path | None = None) -> pd.DataFrame:
    """Recompute the metric table of a finished run from its checkpoints, without training."""

    run_dir = Path(run_dir)
    manifest = read_manifest(run_dir)
    config = manifest.experiment_config()
    records = read_dataset(manifest.dataset_path)
    if content_hash(records) != manifest.dataset_hash:
        raise ConfigError(f"Dataset at {manifest.dataset_path} no longer matches the run manifest.")
    table = SequenceTable.from_records(records)
    splits = {split.fold: split for split in plan_splits(table, config)}

    outcomes: Dict[int, Optional[FoldOutcome]] = {}
    for record in manifest.folds:
        if record.artifacts is None:
            outcomes[record.fold] = None
            continue
        data = prepare_fold(table, splits[record.fold], config.run.std_floor, record.artifacts.normalizer)
        base, fitted = load_fold(run_dir, record.artifacts)
        fitted = {name: fitted[name] for name in manifest.methods}
        scored, reports = evaluate_fold(fitted, base, data, config)
        outcomes[record.fold] = FoldOutcome(
            fold=record.fold,
            methods={name: method.state for name, method in fitted.items()},
            scored=scored,
            reports=reports,
            ids=data.test.ids,
            timing=record.timing or FoldTiming(),
        )
    metrics, _ = _tables(outcomes, manifest.methods, config)
    write_csv(metrics, Path(out_path) if out_path else run_dir / RESCORED_FILE)
    return metrics


__all__ = [
    "ExperimentResult",
    "FoldOutcome",
    "evaluate_fold",
    "load_table",
    "plan_splits",
    "rescore_run",
    "run_experiment",
    "run_fold",
]
