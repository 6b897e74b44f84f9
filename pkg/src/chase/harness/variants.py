"""Declarative wiring of every evaluated method: baselines, CHASE and the ablation lattice."""

from __future__ import annotations

from typing import Dict, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

from ..config import BASELINE_METHODS, VARIANT_CODES, SelectorConfig
from ..errors import ConfigError
from ..labels import CONNECTED, NOT_CONNECTED

ModelKind = Literal["dual", "connected", "not_connected", "classifier"]
ScoreRule = Literal["selector", "max_fused", "msp", "mc_dropout", "deep_ensemble"]


class VariantSpec(BaseModel):
    """What a method trains and how it turns outputs into (prediction, accept score)."""

    model_config = ConfigDict(frozen=True)

    code: str
    description: str
    model: ModelKind = "dual"
    score: ScoreRule = "selector"
    ensemble: bool = Field(False, description="Use every configured seed instead of the first.")
    aux_fusion: bool = Field(False, description="Tune alpha_f on validation; otherwise alpha_f = 1.")
    aux_features: bool = Field(False, description="Expose auxiliary-head columns of phi to the selector.")
    budgeted: bool = Field(False, description="Use max(E, gamma * a) instead of E as the selector target.")
    ranking: bool = Field(False, description="Keep the pairwise ranking terms (w, c).")
    tie_break: Optional[int] = None

    @property
    def uses_selector(self) -> bool:
        return self.score == "selector"


VARIANTS: Dict[str, VariantSpec] = {
    spec.code: spec
    for spec in (
        VariantSpec(code="S", description="single-branch GRU + MSP", model="classifier", score="msp"),
        VariantSpec(
            code="M", description="dual backbone + max fused probability", score="max_fused", aux_fusion=True
        ),
        VariantSpec(
            code="C",
            description="connected head scores both classes",
            model="connected",
            budgeted=True,
            tie_break=CONNECTED,
        ),
        VariantSpec(
            code="D",
            description="not-connected head scores both classes",
            model="not_connected",
            budgeted=True,
            tie_break=NOT_CONNECTED,
        ),
        VariantSpec(code="L", description="selector on errors only"),
        VariantSpec(code="B", description="+ budgeted accept cost", budgeted=True),
        VariantSpec(
            code="A", description="+ auxiliary fusion", budgeted=True, aux_fusion=True, aux_features=True
        ),
        VariantSpec(
            code="E",
            description="+ seed ensemble",
            budgeted=True,
            aux_fusion=True,
            aux_features=True,
            ensemble=True,
        ),
        VariantSpec(
            code="F",
            description="full CHASE (+ pairwise ranking)",
            budgeted=True,
            aux_fusion=True,
            aux_features=True,
            ensemble=True,
            ranking=True,
        ),
    )
}
assert tuple(VARIANTS) == VARIANT_CODES

BASELINES: Dict[str, VariantSpec] = {
    "MSP": VariantSpec(code="MSP", description="maximum softmax probability", model="classifier", score="msp"),
    "MCDropout": VariantSpec(
        code="MCDropout", description="Monte Carlo dropout", model="classifier", score="mc_dropout"
    ),
    "DeepEnsemble": VariantSpec(
        code="DeepEnsemble",
        description="deep ensemble",
        model="classifier",
        score="deep_ensemble",
        ensemble=True,
    ),
}
assert tuple(BASELINES) == BASELINE_METHODS


def method_spec(name: str) -> VariantSpec:
    """Resolve a method or variant name; ``CHASE`` is variant F."""

    if name == "CHASE":
        return VARIANTS["F"]
    if name in BASELINES:
        return BASELINES[name]
    if name in VARIANTS:
        return VARIANTS[name]
    raise ConfigError(f"Unknown method '{name}'.")


def effective_weights(spec: VariantSpec, weights: SelectorConfig) -> SelectorConfig:
    """Selector config with gamma zeroed without the budget and w, c zeroed without ranking."""

    updates = {}
    if not spec.budgeted:
        updates["gamma"] = 0.0
    if not spec.ranking:
        updates["w"] = 0.0
        updates["c"] = 0.0
    return weights.model_copy(update=updates)


def method_names(methods: Tuple[str, ...], variants: Tuple[str, ...]) -> Tuple[str, ...]:
    """Evaluation roster in a stable order: methods first, then ablation codes."""

    return tuple(dict.fromkeys((*methods, *variants)))
