"""Per-feature z-scoring with statistics taken from the training split only."""

from __future__ import annotations

from typing import List

import numpy as np
from pydantic import BaseModel, Field

from ..errors import InvalidInputError, InvalidShapeError


class Normalizer(BaseModel):
    mean: List[float]
    std: List[float]
    fitted_on: str = Field("train", description="Provenance tag of the split the statistics came from.")
    fold: int = -1
    n_sequences: int = 0

    @classmethod
    def fit(
        cls, features: np.ndarray, *, std_floor: float = 1e-6, fitted_on: str = "train", fold: int = -1
    ) -> "Normalizer":
        x = np.asarray(features, dtype=np.float64)
        if x.size == 0:
            raise InvalidInputError("Cannot fit normalization statistics on an empty split.")
        frames = x.reshape(-1, x.shape[-1])
        return cls(
            mean=frames.mean(axis=0).tolist(),
            std=np.maximum(frames.std(axis=0), std_floor).tolist(),
            fitted_on=fitted_on,
            fold=fold,
            n_sequences=int(x.shape[0]) if x.ndim == 3 else 1,
        )

    def transform(self, features: np.ndarray) -> np.ndarray:
        x = np.asarray(features, dtype=np.float64)
        if x.shape[-1] != len(self.mean):
            raise InvalidShapeError(f"Expected {len(self.mean)} feature columns, got {x.shape[-1]}.")
        return (x - np.asarray(self.mean)) / np.asarray(self.std)


def normalize_features(train_features: np.ndarray, std_floor: float = 1e-6, fold: int = -1) -> Normalizer:
    return Normalizer.fit(train_features, std_floor=std_floor, fold=fold)
