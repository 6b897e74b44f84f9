"""Named parameter tensors paired with gradient accumulators."""

from __future__ import annotations

from typing import Dict, Iterator

import numpy as np

from ..errors import InvalidShapeError, NumericalFailureError


def as_tensor(values, *, name: str = "tensor") -> np.ndarray:
    """Coerce to a contiguous float64 array and reject non-finite entries."""

    array = np.ascontiguousarray(values, dtype=np.float64)
    if not np.all(np.isfinite(array)):
        raise NumericalFailureError(f"{name} contains non-finite values")
    return array


def check_finite(array: np.ndarray, name: str) -> np.ndarray:
    if not np.all(np.isfinite(array)):
        bad = int(np.size(array) - np.count_nonzero(np.isfinite(array)))
        raise NumericalFailureError(f"{name} is not finite", diagnostic=f"{bad} bad entries")
    return array


class ParamSet:
    """Ordered mapping of parameter name to value, each with a same-shaped gradient slot."""

    def __init__(self) -> None:
        self._values: Dict[str, np.ndarray] = {}
        self._grads: Dict[str, np.ndarray] = {}

    def add(self, name: str, value: np.ndarray) -> np.ndarray:
        if name in self._values:
            raise ValueError(f"Parameter '{name}' already registered.")
        array = as_tensor(value, name=name).copy()
        self._values[name] = array
        self._grads[name] = np.zeros_like(array)
        return array

    def __getitem__(self, name: str) -> np.ndarray:
        return self._values[name]

    def __contains__(self, name: str) -> bool:
        return name in self._values

    def __iter__(self) -> Iterator[str]:
        return iter(self._values)

    def __len__(self) -> int:
        return len(self._values)

    def names(self) -> list[str]:
        return list(self._values)

    def grad(self, name: str) -> np.ndarray:
        return self._grads[name]

    def accumulate(self, name: str, gradient: np.ndarray) -> None:
        slot = self._grads[name]
        if gradient.shape != slot.shape:
            raise InvalidShapeError(
                f"Gradient for '{name}' has shape {gradient.shape}, expected {slot.shape}."
            )
        slot += gradient

    def zero_grad(self) -> None:
        for slot in self._grads.values():
            slot.fill(0.0)

    def set(self, name: str, value: np.ndarray) -> None:
        current = self._values[name]
        array = np.asarray(value, dtype=np.float64)
        if array.shape != current.shape:
            raise InvalidShapeError(
                f"Value for '{name}' has shape {array.shape}, expected {current.shape}."
            )
        current[...] = array

    def copy(self) -> "ParamSet":
        clone = ParamSet()
        for name, value in self._values.items():
            clone.add(name, value)
        return clone

    def load(self, other: "ParamSet") -> None:
        """Overwrite values in place from another set with identical names and shapes."""

        if other.names() != self.names():
            raise InvalidShapeError("Parameter sets do not share the same names.")
        for name in self._values:
            self.set(name, other[name])

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: value.copy() for name, value in self._values.items()}

    @classmethod
    def from_state_dict(cls, state: Dict[str, np.ndarray]) -> "ParamSet":
        params = cls()
        for name, value in state.items():
            params.add(name, value)
        return params

    def size(self) -> int:
        return int(sum(value.size for value in self._values.values()))


def uniform_init(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    """Uniform ±1/sqrt(fan_in) initialisation."""

    bound = 1.0 / np.sqrt(max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape)
