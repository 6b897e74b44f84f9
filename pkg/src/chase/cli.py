"""Command-line entry point: generate data, train and evaluate methods, ablate, sweep and report."""

import argparse
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import pandas as pd

from .config import VARIANT_CODES, ExperimentConfig, load_config
from .errors import ChaseError, ConfigError
from .harness import rescore_run, run_experiment, run_sweep, write_report
from .harness.report import METRICS_FILE, PREDICTIONS_FILE, SUMMARY_TABLE, read_metrics
from .logs import set_debug
from .simulator import generate_dataset, write_dataset



def _load_env_file(env_path: Path) -> None:
    """Populate os.environ from a .env file if present without overriding existing vars."""

    if not env_path.exists():
        return

    for raw_line in env_path.read_text(encoding="utf-8").splitlines():
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("export "):
            line = line[len("export ") :]
        key, sep, value = line.partition("=")
        if not sep:
            continue
        key = key.strip()
        if not key or key in os.environ:
            continue
        os.environ[key] = value.strip().strip('"').strip("'")


def _coverages(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"coverage list must be comma-separated floats, got {text!r}") from exc


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--config",
        type=Path,
        default=os.getenv("CHASE_CONFIG"),
        help="YAML config file (defaults to $CHASE_CONFIG, then built-in defaults).",
    )
    parser.add_argument("--seed", type=int, help="Master seed for data generation and fold assignment.")
    parser.add_argument("--out", type=Path, default=os.getenv("CHASE_OUT"), help="Output directory.")
    parser.add_argument("--debug", action="store_true", help="Log at DEBUG level.")


def _experiment(parser: argparse.ArgumentParser) -> None:
    _common(parser)
    parser.add_argument("--data", type=Path, help="Existing dataset (JSONL file or directory) to evaluate on.")
    parser.add_argument("--coverage", type=_coverages, help="Target coverages, e.g. 0.8,0.9.")
    parser.add_argument(
        "--workers",
        type=int,
        default=int(os.getenv("CHASE_WORKERS", "0")) or None,
        help="Folds trained in parallel (defaults to $CHASE_WORKERS, then the config).",
    )


def _parse_args(argv: Optional[list[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="chase",
        description="Hypothesis-driven selective prediction on simulated vesicle-pair sequences.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    generate = commands.add_parser("generate", help="Simulate a dataset and write it as JSONL.")
    _common(generate)

    train = commands.add_parser("train", help="Train, calibrate and evaluate the configured methods.")
    _experiment(train)
    train.add_argument("--methods", help="Comma-separated subset of MSP,MCDropout,DeepEnsemble,CHASE.")

    ablate = commands.add_parser("ablate", help="Run ablation variants of the selector lattice.")
    _experiment(ablate)
    ablate.add_argument(
        "--variant",
        default="all",
        help=f"Variant code from {','.join(VARIANT_CODES)}, a comma-separated list, or 'all'.",
    )

    sweep = commands.add_parser("sweep", help="Localized (gamma, w, c) sweep of the selector weights.")
    _experiment(sweep)

    evaluate = commands.add_parser("evaluate", help="Rescore a finished run from its checkpoints.")
    evaluate.add_argument("--run", type=Path, required=True, help="Run directory holding run_manifest.json.")
    evaluate.add_argument("--out", type=Path, help="Where to write the rescored metric CSV.")
    evaluate.add_argument("--debug", action="store_true", help="Log at DEBUG level.")

    report = commands.add_parser("report", help="Rebuild summary tables and plots of a finished run.")
    report.add_argument("--run", type=Path, required=True, help="Run directory holding metrics.csv.")
    report.add_argument("--debug", action="store_true", help="Log at DEBUG level.")
    return parser.parse_args(argv)


def _variants(text: str) -> List[str]:
    if text.strip().lower() == "all":
        return list(VARIANT_CODES)
    codes = [code.strip().upper() for code in text.split(",") if code.strip()]
    unknown = [code for code in codes if code not in VARIANT_CODES]
    if unknown or not codes:
        raise ConfigError(f"Unknown ablation variant(s) {unknown or text!r}; expected {VARIANT_CODES} or 'all'.")
    return codes


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    run: Dict[str, Any] = {
        "output_dir": getattr(args, "out", None),
        "dataset_path": getattr(args, "data", None),
        "coverages": getattr(args, "coverage", None),
        "workers": getattr(args, "workers", None),
        "seed": args.seed,
    }
    if getattr(args, "methods", None):
        run["methods"] = [name.strip() for name in args.methods.split(",") if name.strip()]
    if args.command == "ablate":
        run["methods"] = []
        run["variants"] = _variants(args.variant)
    return {
        "simulator": {"seed": args.seed},
        "run": {key: str(value) if isinstance(value, Path) else value for key, value in run.items()},
    }


def _config(args: argparse.Namespace) -> ExperimentConfig:
    return load_config(args.config, _overrides(args))


def _generate(args: argparse.Namespace) -> int:
    config = _config(args)
    records, manifest = generate_dataset(config.simulator)
    target = write_dataset(records, manifest, args.out or config.run.output_dir / "data")
    print(f"{len(records)} sequences written to {target} (hash {manifest.content_hash[:12]})")
    return 0


def _run(args: argparse.Namespace) -> int:
    config = _config(args)
    result = run_experiment(config)
    print((result.out_dir / SUMMARY_TABLE).read_text(encoding="utf-8"))
    if result.failed:
        sys.stderr.write(f"[ERROR] fold(s) {result.failed} failed; see the log above.\n")
        return 1
    return 0


def _sweep(args: argparse.Namespace) -> int:
    config = _config(args)
    frame = run_sweep(config)
    print(frame.to_string(index=False, float_format=lambda value: f"{100 * value:.2f}"))
    return 0


def _evaluate(args: argparse.Namespace) -> int:
    metrics = rescore_run(args.run, args.out)
    print(f"Rescored {metrics['method'].nunique()} method(s) over {metrics['fold'].nunique()} fold(s).")
    return 0


def _report(args: argparse.Namespace) -> int:
    metrics_path = args.run / METRICS_FILE
    if not metrics_path.exists():
        raise ConfigError(f"{metrics_path} does not exist; run 'chase train' or 'chase ablate' first.")
    predictions_path = args.run / PREDICTIONS_FILE
    predictions = pd.read_csv(predictions_path) if predictions_path.exists() else None
    write_report(args.run, read_metrics(metrics_path), predictions)
    print((args.run / SUMMARY_TABLE).read_text(encoding="utf-8"))
    return 0


COMMANDS = {
    "generate": _generate,
    "train": _run,
    "ablate": _run,
    "sweep": _sweep,
    "evaluate": _evaluate,
    "report": _report,
}


def main(argv: Optional[list[str]] = None) -> int:
    _load_env_file(Path(".env"))
    args = _parse_args(argv)
    set_debug(args.debug)

    try:
        return COMMANDS[args.command](args)
    except ChaseError as exc:
        sys.stderr.write(f"[ERROR] {exc}\n")
    except KeyboardInterrupt:
        sys.stderr.write("[INFO] Run interrupted by user.\n")
    return 1


if __name__ == "__main__":  # pragma: no cover - CLI entry point
    raise SystemExit(main())
