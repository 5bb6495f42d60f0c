"""He initialization and the Adam update rule."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractViolation


def he_initialize(shape, fan_in: int, rng) -> np.ndarray:
    """Zero-mean normal draws with variance ``2 / fan_in``."""
    if fan_in < 1:
        raise ContractViolation("fan_in must be >= 1")
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), shape)


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0


def adam_step(params: dict, grads: dict, state: AdamState, lr: float = 1e-3,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
              frozen=()) -> AdamState:
    """Bias-corrected Adam update applied in place to ``params``."""
    state.step += 1
    c1 = 1.0 - beta1**state.step
    c2 = 1.0 - beta2**state.step
    for name, g in grads.items():
        if name in frozen:
            continue
        p = params[name]
        if p.shape != g.shape:
            raise ContractViolation(f"gradient for {name} has shape {g.shape}, parameter {p.shape}")
        m = state.m.setdefault(name, np.zeros_like(p))
        v = state.v.setdefault(name, np.zeros_like(p))
        m *= beta1
        m += (1 - beta1) * g
        v *= beta2
        v += (1 - beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return state
