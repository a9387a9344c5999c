from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from ..core import ConfigError

Params = Dict[str, np.ndarray]


class DivergenceError(Exception):
    def __init__(self, message: str, diagnostics: Optional[Dict[str, object]] = None):
        super().__init__(message)
        self.message = message
        self.diagnostics = diagnostics or {}

    def __str__(self) -> str:
        if not self.diagnostics:
            return self.message
        details = ", ".join(f"{k}={v}" for k, v in sorted(self.diagnostics.items()))
        return f"{self.message} ({details})"


def check_finite(grads: Params, context: str) -> None:
    for name, value in grads.items():
        if not np.all(np.isfinite(value)):
            raise DivergenceError(f"non-finite gradient in {context}", {"param": name})


@dataclass
class AdamState:
    alpha: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: Params = field(default_factory=dict)
    v: Params = field(default_factory=dict)

    def __post_init__(self):
        if self.alpha <= 0:
            raise ConfigError(f"step size {self.alpha} must be positive", key="learn.alpha")


def adam_step(state: AdamState, params: Params, grads: Params) -> Tuple[AdamState, Params]:
    """Applies one bias-corrected Adam update to params in place."""
    check_finite(grads, "adam_step")
    state.t += 1
    correction1 = 1.0 - state.beta1 ** state.t
    correction2 = 1.0 - state.beta2 ** state.t
    for name, grad in grads.items():
        param = params[name]
        if grad.shape != param.shape:
            raise ConfigError(f"gradient for '{name}' has shape {grad.shape}, parameter has {param.shape}")
        m = state.m.setdefault(name, np.zeros_like(param))
        v = state.v.setdefault(name, np.zeros_like(param))
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * grad * grad
        param -= (state.alpha * (m / correction1) / (np.sqrt(v / correction2) + state.eps)).astype(param.dtype)
    return state, params


@dataclass
class SgdState:
    alpha: float


def sgd_step(state: SgdState, params: Params, grads: Params) -> Tuple[SgdState, Params]:
    check_finite(grads, "sgd_step")
    for name, grad in grads.items():
        params[name] -= (state.alpha * grad).astype(params[name].dtype)
    return state, params


def make_optimizer(kind: str, alpha: float):
    if kind == "adam":
        return AdamState(alpha)
    if kind == "sgd":
        if alpha <= 0:
            raise ConfigError(f"step size {alpha} must be positive", key="learn.alpha")
        return SgdState(alpha)
    raise ConfigError(f"unknown optimizer '{kind}'", key="learn.optimizer")


def optimizer_step(state, params: Params, grads: Params):
    if isinstance(state, AdamState):
        return adam_step(state, params, grads)
    return sgd_step(state, params, grads)
