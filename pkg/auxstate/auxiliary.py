from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np

from .core import ConfigError

LOBSTER_REWARDS = (1, 2)


def _check_decay(decay: float) -> float:
    if not 0.0 <= decay <= 1.0:
        raise ConfigError(f"trace decay {decay} outside [0, 1]", key="aux.lambda")
    return float(decay)


@dataclass(frozen=True)
class TraceState:
    values: np.ndarray
    decay: float

    @classmethod
    def zeros(cls, shape, decay: float) -> "TraceState":
        return cls(np.zeros(shape), _check_decay(decay))


def trace_update(tr: TraceState, g_value, clamp: bool = True) -> TraceState:
    values = tr.decay * tr.values + np.asarray(g_value, dtype=np.float64)
    if clamp:
        values = np.clip(values, 0.0, 1.0)
    return replace(tr, values=values)


def lobster_trace_update(tr: TraceState, obs) -> TraceState:
    values = np.array(tr.values, dtype=np.float64)
    for slot, i in enumerate(LOBSTER_REWARDS):
        if obs[3 * i + 2] == 1:
            values[slot] = tr.decay * values[slot]
        else:
            values[slot] = obs[3 * i]
    return replace(tr, values=values)


def trace_closed_form(history: Sequence, decay: float) -> np.ndarray:
    if len(history) == 0:
        return np.zeros(np.shape(history)[1:])
    g = np.asarray(history, dtype=np.float64)
    ages = np.arange(len(g) - 1, -1, -1)
    kernel = np.power(float(decay), ages)
    return np.tensordot(kernel, g, axes=(0, 0))


def map_trace_update(tr: TraceState, visibility, decay: Optional[float] = None) -> TraceState:
    lam = tr.decay if decay is None else _check_decay(decay)
    values = np.clip(lam * tr.values + np.asarray(visibility, dtype=np.float64), 0.0, 1.0)
    return TraceState(values, lam)


@dataclass(frozen=True)
class LikelihoodState:
    steps_since_missing: Tuple[float, ...]
    rate: float
    expected_steps: np.ndarray

    @classmethod
    def start(cls, rate: float, expected_steps: np.ndarray) -> "LikelihoodState":
        if rate <= 0:
            raise ConfigError(f"likelihood rate {rate} must be positive", key="aux.rate")
        return cls((np.inf,) * len(LOBSTER_REWARDS), float(rate), np.asarray(expected_steps))

    def values(self, location: int) -> np.ndarray:
        out = np.empty(len(self.steps_since_missing))
        for slot, counter in enumerate(self.steps_since_missing):
            elapsed = counter + self.expected_steps[slot, location]
            out[slot] = -np.expm1(-elapsed * self.rate)
        return out


def likelihood_update(ls: LikelihoodState, obs, location: int) -> Tuple[LikelihoodState, np.ndarray]:
    counters = []
    for slot, i in enumerate(LOBSTER_REWARDS):
        counter = ls.steps_since_missing[slot]
        if obs[3 * i] == 1:
            counter = 0.0
        elif obs[3 * i + 1] == 1:
            counter = np.inf
        else:
            counter = counter + 1.0
        counters.append(counter)
    nxt = replace(ls, steps_since_missing=tuple(counters))
    return nxt, nxt.values(location)


@dataclass(frozen=True)
class FrameStack:
    frames: Tuple[np.ndarray, ...]

    @classmethod
    def empty(cls, obs_dim: int, depth: int) -> "FrameStack":
        if depth < 1:
            raise ConfigError(f"frame stack depth {depth} must be at least 1", key="aux.frames")
        return cls(tuple(np.zeros(obs_dim) for _ in range(depth)))

    def flat(self) -> np.ndarray:
        return np.concatenate(self.frames)


def frame_stack_update(fs: FrameStack, obs) -> FrameStack:
    return FrameStack((np.asarray(obs, dtype=np.float64),) + fs.frames[:-1])
