"""Typed configuration for every stage, loaded from YAML with nested overrides."""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Any, Dict, Literal, Mapping, Optional, Tuple

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError
from .labels import AMBIGUITY_BINS, N_FEATURES, REGIMES


def available_cpus() -> int:
    return os.cpu_count() or 1


DEFAULT_SEEDS = (42, 143, 244)
VARIANT_CODES = ("S", "M", "C", "D", "L", "B", "A", "E", "F")
BASELINE_METHODS = ("MSP", "MCDropout", "DeepEnsemble")
DEFAULT_METHODS = ("MSP", "MCDropout", "DeepEnsemble", "CHASE")
# Selector-weight rows (g, w, c) in percent, the localized sweep around the chosen point.
SWEEP_GRID: Tuple[Tuple[int, int, int], ...] = (
    (60, 70, 10),
    (62, 66, 10),
    (62, 68, 10),
    (62, 68, 8),
    (60, 68, 10),
    (60, 72, 8),
    (58, 72, 10),
    (65, 65, 8),
    (64, 66, 10),
)


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SimConfig(_Strict):
    """Dynamics, observation and dataset-layout knobs of the vesicle-pair simulator."""

    frames: int = Field(64, ge=2, description="Frames T per sequence.")
    box_size: float = Field(1.0, gt=0, description="Side of the square arena.")
    radius_range: Tuple[float, float] = Field((0.03, 0.06), description="Vesicle radius bounds.")
    brownian_sigma: float = Field(0.005, ge=0, description="Per-axis Brownian step per frame.")
    spring_stiffness: float = Field(0.15, ge=0, lt=0.5, description="Spring k for connected pairs.")
    rest_offset: float = Field(0.02, ge=0, description="Rest length = r1 + r2 + offset.")
    initial_gap_range: Tuple[float, float] = Field(
        (0.02, 0.12), description="Initial centroid distance beyond rest length."
    )
    drift_amplitude: float = Field(0.01, ge=0, description="Shared drift speed in active windows.")
    drift_turn_sigma: float = Field(0.1, ge=0, description="Per-frame drift heading random walk.")
    connected_drift_scale: float = Field(0.5, ge=0, description="Drift factor for tethered pairs.")
    proximity_stiffness_scale: float = Field(
        0.5, ge=0, description="Distractor approach strength as a fraction of spring k."
    )
    proximity_far_factor: float = Field(
        1.5, ge=1, description="Distractor approach target (x rest length) at alpha = 0."
    )
    obs_noise: float = Field(0.002, ge=0, description="Base observation noise on positions.")
    bridge_latent_noise: float = Field(0.05, ge=0)
    bridge_degradation: float = Field(0.9, ge=0, le=1)
    false_bridge_gain: float = Field(0.5, ge=0)
    false_bridge_range: float = Field(1.5, ge=1, description="Distance (x rest length) for false bridges.")
    support_scale: float = Field(40.0, ge=0)
    support_noise: Tuple[float, float] = Field((1.0, 4.0), description="Integer noise std = a + b*alpha.")
    score_noise: Tuple[float, float] = Field((0.05, 0.2))
    width_noise: Tuple[float, float] = Field((0.05, 0.1))
    width_scale: float = Field(0.5, ge=0)
    ambiguity_strata: Tuple[Tuple[float, float], ...] = Field(AMBIGUITY_BINS)
    regime_mix: Dict[str, float] = Field(default_factory=lambda: {regime: 0.5 for regime in REGIMES})
    n_sequences: int = Field(3360, gt=0)
    split_fractions: Tuple[float, float, float] = Field((5 / 7, 1 / 7, 1 / 7))
    seed: int = Field(0, ge=0)
    workers: int = Field(default_factory=available_cpus, ge=1, description="Threads simulating pairs.")

    @field_validator("regime_mix")
    @classmethod
    def _mix_sums_to_one(cls, value: Dict[str, float]) -> Dict[str, float]:
        unknown = set(value) - set(REGIMES)
        if unknown:
            raise ValueError(f"Unknown regimes {sorted(unknown)}.")
        if any(share < 0 for share in value.values()) or abs(sum(value.values()) - 1.0) > 1e-9:
            raise ValueError("regime_mix must be non-negative and sum to 1.")
        return value

    @model_validator(mode="after")
    def _ranges_ordered(self) -> "SimConfig":
        for name in ("radius_range", "initial_gap_range"):
            low, high = getattr(self, name)
            if not 0 <= low <= high:
                raise ValueError(f"{name} must satisfy 0 <= low <= high.")
        if abs(sum(self.split_fractions) - 1.0) > 1e-9:
            raise ValueError("split_fractions must sum to 1.")
        return self


class BackboneConfig(_Strict):
    """Dual-hypothesis GRU backbone and its training schedule."""

    input_dim: int = Field(N_FEATURES, gt=0)
    hidden_size: int = Field(64, gt=0)
    aux_hidden: int = Field(32, gt=0)
    margin: float = Field(1.0, gt=0)
    lambda_margin: float = Field(1.0, ge=0)
    lambda_aux: float = Field(1.5, ge=0)
    hypotheses: Literal["dual", "connected", "not_connected"] = "dual"
    epochs: int = Field(30, ge=1)
    batch_size: int = Field(64, ge=1)
    patience: int = Field(6, ge=1)
    lr: float = Field(1e-3, gt=0)
    seed: int = 42


class ClassifierConfig(_Strict):
    """Single-branch GRU classifier shared by the MSP / MC Dropout / Deep Ensemble baselines."""

    input_dim: int = Field(N_FEATURES, gt=0)
    hidden_size: int = Field(64, gt=0)
    head_hidden: int = Field(32, gt=0)
    dropout: float = Field(0.2, ge=0, lt=1)
    mc_passes: int = Field(20, ge=2)
    epochs: int = Field(30, ge=1)
    batch_size: int = Field(64, ge=1)
    patience: int = Field(6, ge=1)
    lr: float = Field(1e-3, gt=0)
    seed: int = 42


class SelectorConfig(_Strict):
    """Cost-aware pairwise selector: loss weights, architecture and schedule."""

    gamma: float = Field(0.62, ge=0, le=1, description="Budgeted cost for ambiguous commitments.")
    w: float = Field(0.66, ge=0, description="Weight of the error ranking term.")
    c: float = Field(0.10, ge=0, description="Weight of the budgeted-cost ranking term.")
    rank_margin: float = Field(1.0, ge=0)
    pair_cap: int = Field(512, ge=1)
    width: int = Field(24, gt=0)
    depth: int = Field(2, ge=2, description="Number of affine layers.")
    dropout: float = Field(0.1, ge=0, lt=1)
    epochs: int = Field(80, ge=1)
    patience: int = Field(8, ge=1)
    batch_size: int = Field(64, ge=2)
    lr: float = Field(1e-2, gt=0, description="Adam step size.")
    holdout_fraction: float = Field(0.2, gt=0, lt=1)
    crossfit_folds: int = Field(5, ge=2, description="Members of the cross-fitted selector used by the harness.")
    seed: int = 42


class RunConfig(_Strict):
    """Cross-validation protocol, method roster and output locations."""

    dataset_path: Optional[Path] = None
    folds: int = Field(5, ge=2)
    validation_fraction: float = Field(0.2, gt=0, lt=1)
    coverages: Tuple[float, ...] = (0.80, 0.90)
    methods: Tuple[str, ...] = DEFAULT_METHODS
    variants: Tuple[str, ...] = ()
    seeds: Tuple[int, ...] = DEFAULT_SEEDS
    fusion_grid_points: int = Field(21, ge=2)
    split_mode: Literal["kfold", "fixed"] = "kfold"
    sweep_grid: Tuple[Tuple[int, int, int], ...] = SWEEP_GRID
    std_floor: float = Field(1e-6, gt=0)
    output_dir: Path = Path("runs/default")
    save_checkpoints: bool = True
    workers: int = Field(default_factory=available_cpus, ge=1, description="Folds run in parallel.")
    seed: int = Field(0, ge=0)

    @field_validator("coverages")
    @classmethod
    def _coverage_range(cls, value: Tuple[float, ...]) -> Tuple[float, ...]:
        if not value or any(not 0 < target <= 1 for target in value):
            raise ValueError("coverage targets must lie in (0, 1].")
        return tuple(sorted(set(value)))

    @field_validator("variants")
    @classmethod
    def _known_variants(cls, value: Tuple[str, ...]) -> Tuple[str, ...]:
        unknown = [code for code in value if code not in VARIANT_CODES]
        if unknown:
            raise ValueError(f"Unknown ablation variants {unknown}; expected codes from {VARIANT_CODES}.")
        return value

    @field_validator("methods")
    @classmethod
    def _known_methods(cls, value: Tuple[str, ...]) -> Tuple[str, ...]:
        allowed = set(DEFAULT_METHODS)
        unknown = [method for method in value if method not in allowed]
        if unknown:
            raise ValueError(f"Unknown methods {unknown}; expected a subset of {DEFAULT_METHODS}.")
        return value

    @field_validator("seeds")
    @classmethod
    def _seeds_nonempty(cls, value: Tuple[int, ...]) -> Tuple[int, ...]:
        if not value:
            raise ValueError("at least one seed is required.")
        return value

    @model_validator(mode="after")
    def _ensemble_has_members(self) -> "RunConfig":
        if "DeepEnsemble" in self.methods and len(self.seeds) < 2:
            raise ValueError("DeepEnsemble needs at least 2 seeds.")
        return self


class ExperimentConfig(_Strict):
    simulator: SimConfig = Field(default_factory=SimConfig)
    backbone: BackboneConfig = Field(default_factory=BackboneConfig)
    classifier: ClassifierConfig = Field(default_factory=ClassifierConfig)
    selector: SelectorConfig = Field(default_factory=SelectorConfig)
    run: RunConfig = Field(default_factory=RunConfig)

    def with_overrides(self, overrides: Mapping[str, Any] | None) -> "ExperimentConfig":
        return build_config(self.model_dump(mode="json"), overrides)

    def digest(self) -> str:
        return config_hash(self)


def merge_overrides(base: Mapping[str, Any], overrides: Mapping[str, Any] | None) -> Dict[str, Any]:
    """Recursively merge ``overrides`` into ``base``; nested mappings merge, leaves replace."""

    merged: Dict[str, Any] = dict(base)
    for key, value in (overrides or {}).items():
        if isinstance(value, Mapping):
            current = merged.get(key)
            merged[key] = merge_overrides(current if isinstance(current, Mapping) else {}, value)
        elif value is not None:
            merged[key] = value
    return merged


def build_config(raw: Mapping[str, Any] | None, overrides: Mapping[str, Any] | None = None) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(merge_overrides(raw or {}, overrides))
    except ValidationError as exc:
        raise ConfigError(f"Invalid configuration: {exc}") from exc


def load_config(path: Path | str | None = None, overrides: Mapping[str, Any] | None = None) -> ExperimentConfig:
    """Read a YAML config (or defaults when ``path`` is None) and apply overrides."""

    raw: Dict[str, Any] = {}
    if path is not None:
        config_path = Path(path)
        if not config_path.exists():
            raise ConfigError(f"Config file {config_path} does not exist.")
        try:
            loaded = yaml.safe_load(config_path.read_text(encoding="utf-8"))
        except yaml.YAMLError as exc:
            raise ConfigError(f"Could not parse {config_path}: {exc}") from exc
        if loaded is not None and not isinstance(loaded, dict):
            raise ConfigError(f"{config_path} must contain a mapping at the top level.")
        raw = loaded or {}
    return build_config(raw, overrides)


def config_hash(model: BaseModel) -> str:
    canonical = json.dumps(model.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
