"""Central finite-difference gradient checker."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Tuple

import numpy as np

from ..errors import NumericalFailureError
from .params import ParamSet

LossFn = Callable[[ParamSet], float]


@dataclass
class GradCheckReport:
    max_rel_error: float
    checked: int
    tol: float
    worst: Tuple[str, int] | None = None
    errors: List[float] = field(default_factory=list, repr=False)

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tol


def _evaluate(loss_fn: LossFn, params: ParamSet) -> float:
    value = float(loss_fn(params))
    if not math.isfinite(value):
        raise NumericalFailureError("Loss is not finite during gradient check", diagnostic=str(value))
    return value


def grad_check(
    loss_fn: LossFn,
    params: ParamSet,
    eps: float = 1e-5,
    tol: float = 1e-4,
    *,
    max_coords: int | None = None,
    seed: int = 0,
    atol: float = 1e-7,
) -> GradCheckReport:
    """Compare analytic gradients to central differences.

    ``loss_fn`` must be deterministic and must zero and repopulate the gradient
    slots of ``params`` every time it is called. The relative error of a
    coordinate is ``|a - n| / max(|a| + |n|, atol)``. When ``max_coords`` is
    given, at least ``min(200, total)`` coordinates are sampled uniformly.
    """

    _evaluate(loss_fn, params)
    analytic = {name: params.grad(name).copy() for name in params}

    coordinates = [(name, index) for name in params for index in range(params[name].size)]
    if max_coords is not None and len(coordinates) > max(max_coords, 200):
        rng = np.random.default_rng(seed)
        picks = rng.choice(len(coordinates), size=max(max_coords, 200), replace=False)
        coordinates = [coordinates[i] for i in sorted(picks)]

    errors: List[float] = []
    worst: Tuple[str, int] | None = None
    max_error = 0.0
    for name, index in coordinates:
        flat = params[name].reshape(-1)
        original = flat[index]
        flat[index] = original + eps
        plus = _evaluate(loss_fn, params)
        flat[index] = original - eps
        minus = _evaluate(loss_fn, params)
        flat[index] = original
        numeric = (plus - minus) / (2.0 * eps)
        exact = analytic[name].reshape(-1)[index]
        error = abs(exact - numeric) / max(abs(exact) + abs(numeric), atol)
        errors.append(error)
        if error > max_error:
            max_error, worst = error, (name, index)

    _evaluate(loss_fn, params)
    return GradCheckReport(max_rel_error=max_error, checked=len(coordinates), tol=tol, worst=worst, errors=errors)
