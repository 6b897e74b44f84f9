"""Matched-pair dataset generation, JSON-lines persistence and array views."""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Literal, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

from .. import rng as rngs
from ..config import SimConfig
from ..errors import ConfigError, InvalidInputError
from ..labels import (
    CONNECTED,
    LABEL_NAMES,
    N_FEATURES,
    NOT_CONNECTED,
    REGIMES,
    LabelName,
    RegimeName,
    ambiguity_bin,
    is_ambiguous,
    label_index,
)
from ..logs import get_logger
from .dynamics import integrate_pair
from .features import extract_features
from .profiles import ActivityProfile, sample_activity_profile

_LOGGER = get_logger(__name__)

DATASET_FILE = "dataset.jsonl"
MANIFEST_FILE = "manifest.json"
FORMAT_VERSION = 1
SplitName = Literal["train", "val", "test"]


class SequenceRecord(BaseModel):
    """One simulated sequence with its label, regime and ambiguity annotations."""

    id: str
    pair_id: int = Field(..., ge=0)
    label: LabelName
    regime: RegimeName
    alpha: float = Field(..., ge=0.0, le=1.0)
    ambiguous: bool
    split: SplitName = "train"
    features: List[List[float]]
    activity: List[float] = Field(default_factory=list, description="Latent u(t); never a model input.")

    @model_validator(mode="after")
    def _check_invariants(self) -> "SequenceRecord":
        if self.ambiguous != is_ambiguous(self.alpha):
            raise ValueError(f"{self.id}: ambiguous flag disagrees with alpha={self.alpha}.")
        if any(len(row) != N_FEATURES for row in self.features):
            raise ValueError(f"{self.id}: every frame needs {N_FEATURES} features.")
        if not np.all(np.isfinite(np.asarray(self.features, dtype=np.float64))):
            raise ValueError(f"{self.id}: features must be finite.")
        return self

    @property
    def label_index(self) -> int:
        return label_index(self.label)


class DatasetManifest(BaseModel):
    format_version: int = FORMAT_VERSION
    seed: int
    config: Dict
    counts: Dict[str, int]
    content_hash: str


@dataclass(frozen=True)
class PairPlan:
    pair_id: int
    regime: str
    stratum: Tuple[float, float]
    split: str


def simulate_pair(
    label: str | int,
    profile: ActivityProfile,
    alpha: float,
    config: SimConfig,
    rng: np.random.Generator,
    *,
    sequence_id: str = "seq-00000",
    pair_id: int = 0,
    split: SplitName = "train",
) -> SequenceRecord:
    """Simulate one member of a matched pair and return its record."""

    if not 0.0 <= alpha <= 1.0:
        raise InvalidInputError(f"alpha must lie in [0, 1], got {alpha}.")
    index = label if isinstance(label, int) else label_index(label)
    trajectory = integrate_pair(index, profile, alpha, config, rng)
    features = extract_features(trajectory.observed, trajectory.bridge, alpha, rng, config)
    return SequenceRecord(
        id=sequence_id,
        pair_id=pair_id,
        label=LABEL_NAMES[index],
        regime=profile.regime,
        alpha=float(alpha),
        ambiguous=is_ambiguous(alpha),
        split=split,
        features=features.tolist(),
        activity=profile.u.tolist(),
    )


def _regime_counts(n_pairs: int, config: SimConfig) -> Dict[str, int]:
    counts: Dict[str, int] = {}
    remaining = n_pairs
    for regime in REGIMES[:-1]:
        counts[regime] = int(round(n_pairs * config.regime_mix.get(regime, 0.0)))
        remaining -= counts[regime]
    counts[REGIMES[-1]] = remaining
    return counts


def _assign_splits(plans: List[PairPlan], config: SimConfig) -> List[PairPlan]:
    """Fixed train/val/test tags per (regime, stratum) cell, assigned per pair."""

    rng = rngs.stream(config.seed, "data", "splits")
    cells: Dict[Tuple[str, Tuple[float, float]], List[int]] = {}
    for position, plan in enumerate(plans):
        cells.setdefault((plan.regime, plan.stratum), []).append(position)
    split_of: Dict[int, str] = {}
    train_share, val_share, _ = config.split_fractions
    for key in sorted(cells):
        members = list(rng.permutation(cells[key]))
        n_train = int(round(train_share * len(members)))
        n_val = int(round(val_share * len(members)))
        for rank, position in enumerate(members):
            split_of[int(position)] = "train" if rank < n_train else "val" if rank < n_train + n_val else "test"
    return [PairPlan(p.pair_id, p.regime, p.stratum, split_of[i]) for i, p in enumerate(plans)]


def plan_pairs(config: SimConfig) -> List[PairPlan]:
    if config.n_sequences % 4 != 0:
        raise ConfigError(
            f"n_sequences={config.n_sequences} must be divisible by 4 (2 labels x 2 regimes)."
        )
    strata = config.ambiguity_strata
    plans: List[PairPlan] = []
    for regime, count in _regime_counts(config.n_sequences // 2, config).items():
        for k in range(count):
            plans.append(PairPlan(len(plans), regime, tuple(strata[k % len(strata)]), "train"))
    return _assign_splits(plans, config)


def _simulate_plan(plan: PairPlan, config: SimConfig) -> Tuple[SequenceRecord, SequenceRecord]:
    rng = rngs.stream(config.seed, "pairs", plan.pair_id)
    profile = sample_activity_profile(plan.regime, rng, config.frames)
    low, high = plan.stratum
    alpha = float(rng.uniform(low, high))
    members = []
    for offset, label in ((0, CONNECTED), (1, NOT_CONNECTED)):
        members.append(
            simulate_pair(
                label,
                profile,
                alpha,
                config,
                rng,
                sequence_id=f"seq-{2 * plan.pair_id + offset:05d}",
                pair_id=plan.pair_id,
                split=plan.split,
            )
        )
    return members[0], members[1]


def generate_dataset(config: SimConfig) -> Tuple[List[SequenceRecord], DatasetManifest]:
    """Generate all matched pairs; output depends only on ``config`` (including its seed)."""

    plans = plan_pairs(config)
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            pairs = list(pool.map(lambda plan: _simulate_plan(plan, config), plans))
    else:
        pairs = [_simulate_plan(plan, config) for plan in plans]
    records = [record for pair in pairs for record in pair]
    manifest = DatasetManifest(
        seed=config.seed,
        config=config.model_dump(mode="json"),
        counts=count_records(records),
        content_hash=content_hash(records),
    )
    _LOGGER.info(
        "Generated %d sequences (%d pairs), hash %s",
        len(records),
        len(plans),
        manifest.content_hash[:12],
    )
    return records, manifest


def count_records(records: Sequence[SequenceRecord]) -> Dict[str, int]:
    counter: Counter = Counter()
    for record in records:
        counter["total"] += 1
        counter[f"label:{record.label}"] += 1
        counter[f"regime:{record.regime}"] += 1
        counter[f"cell:{record.label}/{record.regime}"] += 1
        counter[f"split:{record.split}"] += 1
        counter["ambiguous"] += int(record.ambiguous)
    return dict(sorted(counter.items()))


def to_jsonl(records: Sequence[SequenceRecord]) -> str:
    return "".join(record.model_dump_json() + "\n" for record in records)


def content_hash(records: Sequence[SequenceRecord]) -> str:
    return hashlib.sha256(to_jsonl(records).encode("utf-8")).hexdigest()


def write_dataset(records: Sequence[SequenceRecord], manifest: DatasetManifest, out_dir: Path | str) -> Path:
    target = Path(out_dir)
    target.mkdir(parents=True, exist_ok=True)
    (target / DATASET_FILE).write_text(to_jsonl(records), encoding="utf-8")
    (target / MANIFEST_FILE).write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return target / DATASET_FILE


def read_dataset(path: Path | str) -> List[SequenceRecord]:
    """Load records from a JSONL file or from a directory holding ``dataset.jsonl``."""

    source = Path(path)
    if source.is_dir():
        source = source / DATASET_FILE
    if not source.exists():
        raise InvalidInputError(f"Dataset file {source} does not exist.")
    records = []
    with source.open(encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                records.append(SequenceRecord.model_validate(json.loads(line)))
    return records


@dataclass(frozen=True)
class SequenceTable:
    """Column view of a record list: features (N, T, 6) plus per-sequence annotations."""

    ids: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    alpha: np.ndarray
    ambiguous: np.ndarray
    regimes: np.ndarray
    pair_ids: np.ndarray
    splits: np.ndarray

    @classmethod
    def from_records(cls, records: Sequence[SequenceRecord]) -> "SequenceTable":
        if not records:
            raise InvalidInputError("Cannot build a table from zero records.")
        return cls(
            ids=np.array([r.id for r in records]),
            features=np.array([r.features for r in records], dtype=np.float64),
            labels=np.array([r.label_index for r in records], dtype=np.int64),
            alpha=np.array([r.alpha for r in records], dtype=np.float64),
            ambiguous=np.array([r.ambiguous for r in records], dtype=bool),
            regimes=np.array([r.regime for r in records]),
            pair_ids=np.array([r.pair_id for r in records], dtype=np.int64),
            splits=np.array([r.split for r in records]),
        )

    def __len__(self) -> int:
        return len(self.ids)

    def subset(self, index: np.ndarray) -> "SequenceTable":
        return SequenceTable(
            ids=self.ids[index],
            features=self.features[index],
            labels=self.labels[index],
            alpha=self.alpha[index],
            ambiguous=self.ambiguous[index],
            regimes=self.regimes[index],
            pair_ids=self.pair_ids[index],
            splits=self.splits[index],
        )

    def strata_keys(self) -> np.ndarray:
        """(label, regime, ambiguity bin) keys used for stratified splitting."""

        bins = [ambiguity_bin(alpha) for alpha in self.alpha]
        return np.array(
            [f"{label}|{regime}|{b}" for label, regime, b in zip(self.labels, self.regimes, bins)]
        )
