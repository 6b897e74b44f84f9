"""Stratified cross-validation folds over (label, regime, ambiguity bin) cells."""

from __future__ import annotations

from collections import Counter
from typing import Dict, List

import numpy as np
from pydantic import BaseModel, Field, model_validator
from sklearn.model_selection import StratifiedKFold, train_test_split

from .. import rng as rngs
from ..errors import ConfigError
from ..simulator import SequenceTable


class FoldSplit(BaseModel):
    """Disjoint train / validation / test sequence ids for one fold."""

    fold: int = Field(..., ge=0)
    train: List[str]
    validation: List[str]
    test: List[str]
    strata: Dict[str, int] = Field(default_factory=dict, description="Test-fold count per stratum key.")

    @model_validator(mode="after")
    def _disjoint(self) -> "FoldSplit":
        parts = [set(self.train), set(self.validation), set(self.test)]
        if sum(len(part) for part in parts) != len(set().union(*parts)):
            raise ValueError(f"Fold {self.fold}: train, validation and test overlap.")
        return self

    def indices(self, table: SequenceTable) -> Dict[str, np.ndarray]:
        position = {sequence_id: index for index, sequence_id in enumerate(table.ids)}
        return {
            part: np.array([position[sequence_id] for sequence_id in getattr(self, part)], dtype=np.int64)
            for part in ("train", "validation", "test")
        }


def _check_strata(keys: np.ndarray, k: int) -> None:
    small = {key: count for key, count in Counter(keys.tolist()).items() if count < k}
    if small:
        raise ConfigError(f"Strata smaller than k={k}: {dict(sorted(small.items()))}.")


def make_folds(
    table: SequenceTable, k: int = 5, seed: int = 0, validation_fraction: float = 0.2
) -> List[FoldSplit]:
    """k stratified test partitions; validation is a stratified slice of each remaining train fold."""

    keys = table.strata_keys()
    _check_strata(keys, k)
    splitter = StratifiedKFold(
        n_splits=k, shuffle=True, random_state=rngs.derive_seed(seed, "folds", "outer")
    )
    folds = []
    for fold, (train_index, test_index) in enumerate(splitter.split(np.zeros(len(keys)), keys)):
        inner_keys = keys[train_index]
        stratify = inner_keys if min(Counter(inner_keys.tolist()).values()) >= 2 else None
        fit_index, val_index = train_test_split(
            train_index,
            test_size=validation_fraction,
            random_state=rngs.derive_seed(seed, "folds", "inner", fold),
            stratify=stratify,
        )
        folds.append(
            FoldSplit(
                fold=fold,
                train=table.ids[np.sort(fit_index)].tolist(),
                validation=table.ids[np.sort(val_index)].tolist(),
                test=table.ids[np.sort(test_index)].tolist(),
                strata=dict(sorted(Counter(keys[test_index].tolist()).items())),
            )
        )
    return folds


def fixed_split(table: SequenceTable) -> List[FoldSplit]:
    """A single fold taken from the generation-time split tags."""

    keys = table.strata_keys()
    parts = {name: table.ids[table.splits == name].tolist() for name in ("train", "val", "test")}
    if not all(parts.values()):
        raise ConfigError("Fixed split mode needs train, val and test sequences in the dataset.")
    return [
        FoldSplit(
            fold=0,
            train=parts["train"],
            validation=parts["val"],
            test=parts["test"],
            strata=dict(sorted(Counter(keys[table.splits == "test"].tolist()).items())),
        )
    ]
