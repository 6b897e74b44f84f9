"""Adam optimizer over a ParamSet."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from ..errors import InvalidShapeError
from .params import ParamSet, check_finite


@dataclass
class OptimizerState:
    """First/second moments per parameter plus the bias-correction step counter."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    first_moment: Dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: Dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: ParamSet, **hyper: float) -> "OptimizerState":
        state = cls(**hyper)
        for name in params:
            state.first_moment[name] = np.zeros_like(params[name])
            state.second_moment[name] = np.zeros_like(params[name])
        return state


def adam_step(params: ParamSet, state: OptimizerState) -> tuple[ParamSet, OptimizerState]:
    """Apply one bias-corrected Adam update in place and zero the gradients."""

    state.step += 1
    correction1 = 1.0 - state.beta1**state.step
    correction2 = 1.0 - state.beta2**state.step
    for name in params:
        grad = check_finite(params.grad(name), f"gradient '{name}'")
        m = state.first_moment.setdefault(name, np.zeros_like(grad))
        v = state.second_moment.setdefault(name, np.zeros_like(grad))
        if m.shape != grad.shape or v.shape != grad.shape:
            raise InvalidShapeError(f"Optimizer moments for '{name}' do not match its shape.")
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * grad * grad
        update = state.lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
        params[name][...] -= update
    params.zero_grad()
    return params, state
