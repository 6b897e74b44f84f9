"""Checkpoints and the run manifest: enough to re-score a run without retraining."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

from ..config import BackboneConfig, ClassifierConfig, ExperimentConfig, SelectorConfig
from ..errors import ConfigError
from ..models import ClassifierModel, CostAwareSelector, CrossFitSelector, DualHypothesisBackbone
from ..numerics import ParamSet
from .normalize import Normalizer
from .pipeline import BaseModels, FittedMethod, FoldData, MethodState
from .variants import method_spec

FORMAT_VERSION = 2
MANIFEST_FILE = "run_manifest.json"


def save_params(path: Path, params: ParamSet, meta: Dict[str, Any]) -> Path:
    """Write ``<path>.npz`` tensors and a ``<path>.json`` sidecar (format version, names, meta)."""

    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(path.with_suffix(".npz"), **params.state_dict())
    sidecar = {"format_version": FORMAT_VERSION, "names": params.names(), "meta": meta}
    text = json.dumps(sidecar, indent=2, sort_keys=True) + "\n"
    path.with_suffix(".json").write_text(text, encoding="utf-8")
    return path.with_suffix(".npz")


def load_params(path: Path) -> Tuple[ParamSet, Dict[str, Any]]:
    tensors = path.with_suffix(".npz")
    sidecar = path.with_suffix(".json")
    if not tensors.exists() or not sidecar.exists():
        raise ConfigError(f"Checkpoint {path} is incomplete (need .npz and .json).")
    info = json.loads(sidecar.read_text(encoding="utf-8"))
    if info.get("format_version") != FORMAT_VERSION:
        raise ConfigError(f"Checkpoint {path} has unsupported format {info.get('format_version')}.")
    with np.load(tensors) as archive:
        state = {name: archive[name] for name in info["names"]}
    return ParamSet.from_state_dict(state), info["meta"]


class FoldTiming(BaseModel):
    train_seconds: float = 0.0
    score_seconds: float = 0.0
    ms_per_sequence: float = 0.0


class FoldArtifacts(BaseModel):
    """Relative checkpoint paths and fitted state for one fold."""

    fold: int
    normalizer: Normalizer
    backbones: Dict[str, str] = Field(default_factory=dict)
    classifiers: Dict[str, str] = Field(default_factory=dict)
    selectors: Dict[str, List[str]] = Field(default_factory=dict)
    methods: Dict[str, MethodState] = Field(default_factory=dict)


class FoldRecord(BaseModel):
    fold: int
    status: str
    error: Optional[str] = None
    timing: Optional[FoldTiming] = None
    artifacts: Optional[FoldArtifacts] = None
    thresholds: Dict[str, Dict[str, float]] = Field(default_factory=dict)


class RunManifest(BaseModel):
    format_version: int = FORMAT_VERSION
    config: Dict[str, Any]
    config_hash: str
    dataset_path: str
    dataset_hash: str
    methods: List[str]
    seeds: List[int]
    split_mode: str
    folds: List[FoldRecord] = Field(default_factory=list)

    def experiment_config(self) -> ExperimentConfig:
        return ExperimentConfig.model_validate(self.config)


def _backbone_name(kind: str, seed: int) -> str:
    return f"{kind}@{seed}"


def _store(out_dir: Path, fold: int, stem: str, params: ParamSet, meta: Dict[str, Any]) -> str:
    relative = Path("checkpoints", f"fold{fold}", stem)
    save_params(Path(out_dir) / relative, params, meta)
    return relative.as_posix()


def _selector_meta(selector: CostAwareSelector) -> Dict[str, Any]:
    return {
        "config": selector.config.model_dump(mode="json"),
        "feature_mean": selector.feature_mean.tolist(),
        "feature_std": selector.feature_std.tolist(),
        "seed": selector.seed,
    }


def _load_selector(path: Path) -> CostAwareSelector:
    params, meta = load_params(path)
    return CostAwareSelector(
        SelectorConfig.model_validate(meta["config"]),
        params,
        np.asarray(meta["feature_mean"]),
        np.asarray(meta["feature_std"]),
        int(meta["seed"]),
    )


def save_fold(
    out_dir: Path, data: FoldData, base: BaseModels, fitted: Dict[str, FittedMethod]
) -> FoldArtifacts:
    artifacts = FoldArtifacts(fold=data.fold, normalizer=data.normalizer)
    for (kind, seed), model in base.backbones.items():
        meta = {"config": model.config.model_dump(mode="json")}
        artifacts.backbones[_backbone_name(kind, seed)] = _store(
            out_dir, data.fold, f"backbone_{kind}_{seed}", model.params, meta
        )
    for seed, model in base.classifiers.items():
        meta = {"config": model.config.model_dump(mode="json")}
        artifacts.classifiers[str(seed)] = _store(out_dir, data.fold, f"classifier_{seed}", model.params, meta)
    for name, method in fitted.items():
        artifacts.methods[name] = method.state
        if method.selector is None:
            continue
        artifacts.selectors[name] = [
            _store(out_dir, data.fold, f"selector_{name}_{index}", member.params, _selector_meta(member))
            for index, member in enumerate(method.selector.members)
        ]
    return artifacts


def load_fold(run_dir: Path, artifacts: FoldArtifacts) -> Tuple[BaseModels, Dict[str, FittedMethod]]:
    """Rebuild the fitted models of one fold from its checkpoints."""

    run_dir = Path(run_dir)
    base = BaseModels()
    for name, relative in artifacts.backbones.items():
        kind, seed = name.split("@")
        params, meta = load_params(run_dir / relative)
        config = BackboneConfig.model_validate(meta["config"])
        base.backbones[(kind, int(seed))] = DualHypothesisBackbone(config, params)
    for seed, relative in artifacts.classifiers.items():
        params, meta = load_params(run_dir / relative)
        config = ClassifierConfig.model_validate(meta["config"])
        base.classifiers[int(seed)] = ClassifierModel(config, params, int(seed))

    fitted: Dict[str, FittedMethod] = {}
    for name, state in artifacts.methods.items():
        method = FittedMethod(state=state, spec=method_spec(name))
        if name in artifacts.selectors:
            members = [_load_selector(run_dir / relative) for relative in artifacts.selectors[name]]
            method.selector = CrossFitSelector(members, holdout_scores=np.empty(0))
        fitted[name] = method
    return base, fitted


def write_manifest(out_dir: Path, manifest: RunManifest) -> Path:
    path = Path(out_dir) / MANIFEST_FILE
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return path


def read_manifest(run_dir: Path) -> RunManifest:
    path = Path(run_dir) / MANIFEST_FILE
    if not path.exists():
        raise ConfigError(f"No run manifest at {path}.")
    return RunManifest.model_validate_json(path.read_text(encoding="utf-8"))
