"""One fold's models: train what the roster needs, fit each method, score any split.

Only features and labels reach backbone and classifier training. The ambiguity
flag is read solely when building selector targets on the validation split and
when computing metrics.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np
from pydantic import BaseModel, Field

from ..baselines import deep_ensemble_score, mc_dropout_score, msp_score
from ..config import ExperimentConfig, SelectorConfig
from ..logs import get_logger
from ..metrics import ScoredPredictions
from ..models import (
    BackboneOutput,
    ClassifierModel,
    CrossFitSelector,
    DualHypothesisBackbone,
    TrainingLog,
    accept_scores,
    build_features,
    calibrate_threshold,
    make_samples,
    summarize,
    train_backbone,
    train_classifier,
    train_crossfit_selector,
    tune_fusion_from_outputs,
)
from ..simulator import SequenceTable
from .folds import FoldSplit
from .normalize import Normalizer
from .variants import VariantSpec, effective_weights, method_spec

_LOGGER = get_logger(__name__)

BackboneKey = Tuple[str, int]


def coverage_key(coverage: float) -> str:
    return f"{coverage:.2f}"


@dataclass(frozen=True)
class FoldData:
    """Normalized train / validation / test tables of one fold."""

    fold: int
    train: SequenceTable
    validation: SequenceTable
    test: SequenceTable
    normalizer: Normalizer

    def part(self, name: str) -> SequenceTable:
        return {"train": self.train, "validation": self.validation, "test": self.test}[name]


def prepare_fold(
    table: SequenceTable, split: FoldSplit, std_floor: float = 1e-6, normalizer: Normalizer | None = None
) -> FoldData:
    """Normalize every split with statistics from the train split (or a stored ``normalizer``)."""

    index = split.indices(table)
    train = table.subset(index["train"])
    if normalizer is None:
        normalizer = Normalizer.fit(train.features, std_floor=std_floor, fold=split.fold)

    def _normalized(part: SequenceTable) -> SequenceTable:
        return replace(part, features=normalizer.transform(part.features))

    return FoldData(
        fold=split.fold,
        train=_normalized(train),
        validation=_normalized(table.subset(index["validation"])),
        test=_normalized(table.subset(index["test"])),
        normalizer=normalizer,
    )


def members_for(spec: VariantSpec, seeds: Sequence[int]) -> List[int]:
    return list(seeds) if spec.ensemble else [seeds[0]]


def requirements(names: Sequence[str], seeds: Sequence[int]) -> Tuple[List[BackboneKey], List[int]]:
    """Backbones (kind, seed) and classifier seeds needed by ``names``, in a stable order."""

    backbones: Set[BackboneKey] = set()
    classifiers: Set[int] = set()
    for name in names:
        spec = method_spec(name)
        members = members_for(spec, seeds)
        if spec.model == "classifier":
            classifiers.update(members)
        else:
            backbones.update((spec.model, seed) for seed in members)
    return sorted(backbones), sorted(classifiers)


@dataclass
class BaseModels:
    """Trained backbones and classifiers of one fold plus a per-split output memo."""

    backbones: Dict[BackboneKey, DualHypothesisBackbone] = field(default_factory=dict)
    classifiers: Dict[int, ClassifierModel] = field(default_factory=dict)
    logs: List[TrainingLog] = field(default_factory=list)
    _outputs: Dict[Tuple[str, int, str], BackboneOutput] = field(default_factory=dict, repr=False)

    def outputs(self, kind: str, seeds: Sequence[int], data: FoldData, part: str) -> List[BackboneOutput]:
        collected = []
        for seed in seeds:
            key = (kind, seed, part)
            if key not in self._outputs:
                self._outputs[key] = self.backbones[(kind, seed)].forward(data.part(part).features)
            collected.append(self._outputs[key])
        return collected


def train_base_models(names: Sequence[str], data: FoldData, config: ExperimentConfig) -> BaseModels:
    backbone_keys, classifier_seeds = requirements(names, config.run.seeds)
    train = (data.train.features, data.train.labels)
    validation = (data.validation.features, data.validation.labels)
    base = BaseModels()
    for kind, seed in backbone_keys:
        backbone_config = config.backbone.model_copy(update={"hypotheses": kind})
        model, log = train_backbone(train, validation, backbone_config, seed)
        base.backbones[(kind, seed)] = model
        base.logs.append(log)
    for seed in classifier_seeds:
        model, log = train_classifier(train, validation, config.classifier, seed)
        base.classifiers[seed] = model
        base.logs.append(log)
    return base


class MethodState(BaseModel):
    """Everything about a fitted method except model weights; persisted in the run manifest."""

    name: str
    code: str
    members: List[int]
    alpha_f: float = 1.0
    selector_weights: Optional[Dict[str, float]] = None
    thresholds: Dict[str, float] = Field(default_factory=dict)
    val_coverage: Dict[str, float] = Field(default_factory=dict)
    provenance: Dict[str, str] = Field(default_factory=dict)


@dataclass
class FittedMethod:
    state: MethodState
    spec: VariantSpec
    selector: Optional[CrossFitSelector] = None


def score_split(
    method: FittedMethod, base: BaseModels, data: FoldData, part: str, config: ExperimentConfig
) -> ScoredPredictions:
    """Committed predictions and accept scores of ``method`` on one split."""

    spec, members = method.spec, method.state.members
    table = data.part(part)
    if spec.model == "classifier":
        if spec.score == "msp":
            prediction, scores = msp_score(base.classifiers[members[0]], table.features)
        elif spec.score == "mc_dropout":
            prediction, scores = mc_dropout_score(
                base.classifiers[members[0]], table.features, config.classifier.mc_passes
            )
        else:
            prediction, scores = deep_ensemble_score([base.classifiers[s] for s in members], table.features)
    else:
        outputs = base.outputs(spec.model, members, data, part)
        summary = summarize(outputs, method.state.alpha_f, spec.tie_break)
        prediction = summary.prediction
        if spec.score == "max_fused":
            scores = summary.pi_fused.max(axis=-1)
        else:
            scores = accept_scores(method.selector, build_features(summary, spec.aux_features))
    return ScoredPredictions(prediction, table.labels, table.ambiguous, scores)


def calibrate(method: FittedMethod, validation: ScoredPredictions, coverages: Sequence[float]) -> None:
    """Thresholds per coverage; ``validation`` scores must not come from a model fitted on them."""

    for coverage in coverages:
        tau = calibrate_threshold(validation.scores, coverage)
        key = coverage_key(coverage)
        method.state.thresholds[key] = tau
        method.state.val_coverage[key] = float(np.mean(validation.scores >= tau))


def fit_method(
    name: str,
    base: BaseModels,
    data: FoldData,
    config: ExperimentConfig,
    selector_config: SelectorConfig | None = None,
) -> FittedMethod:
    """Tune fusion, train the selector and calibrate thresholds on the validation split."""

    spec = method_spec(name)
    members = members_for(spec, config.run.seeds)
    state = MethodState(name=name, code=spec.code, members=members)
    state.provenance = {"models": "train", "early_stopping": "validation", "thresholds": "validation"}
    method = FittedMethod(state=state, spec=spec)

    if spec.model != "classifier":
        outputs = base.outputs(spec.model, members, data, "validation")
        if spec.aux_fusion:
            weight = tune_fusion_from_outputs(
                outputs, data.validation.labels, config.run.fusion_grid_points, spec.tie_break
            )
            state.alpha_f = weight.alpha_f
            state.provenance["alpha_f"] = "validation"
        if spec.uses_selector:
            weights = effective_weights(spec, selector_config or config.selector)
            summary = summarize(outputs, state.alpha_f, spec.tie_break)
            samples = make_samples(
                summary, data.validation.labels, data.validation.ambiguous, weights.gamma, spec.aux_features
            )
            method.selector = train_crossfit_selector(samples, weights)
            state.selector_weights = {"gamma": weights.gamma, "w": weights.w, "c": weights.c}
            state.provenance["selector"] = "validation"
            state.provenance["thresholds"] = "validation, held-out cross-fit scores"
            validation = ScoredPredictions(
                summary.prediction,
                data.validation.labels,
                data.validation.ambiguous,
                method.selector.calibration_scores(),
            )
            calibrate(method, validation, config.run.coverages)

    if not method.state.thresholds:
        calibrate(method, score_split(method, base, data, "validation", config), config.run.coverages)
    _LOGGER.info(
        "fold %d %s: alpha_f=%.2f thresholds %s",
        data.fold,
        name,
        state.alpha_f,
        ", ".join(f"{key}->{tau:.4f}" for key, tau in state.thresholds.items()),
    )
    return method
