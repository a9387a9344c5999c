import hashlib
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np


class ConfigError(Exception):
    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.key = key

    def __str__(self) -> str:
        if self.key:
            return f"{self.key}: {self.message}"
        return self.message


class CompositionMode(str, Enum):
    CONCAT_OBS_AUX = "concat-obs-aux"
    AUX_ONLY = "aux-only"
    OBS_ONLY = "obs-only"
    OBS_AUX_ONEHOT = "obs-aux-plus-onehot-action"

    @classmethod
    def parse(cls, value) -> "CompositionMode":
        if isinstance(value, CompositionMode):
            return value
        for mode in cls:
            if mode.value == value:
                return mode
        names = ", ".join(mode.value for mode in cls)
        raise ConfigError(f"Unknown composition mode '{value}' (expected one of {names})")


@dataclass(frozen=True)
class AuxiliaryInputSet:
    inputs: Tuple[np.ndarray, ...] = ()

    @property
    def dims(self) -> Tuple[int, ...]:
        return tuple(int(np.size(m)) for m in self.inputs)

    def flat(self) -> np.ndarray:
        if not self.inputs:
            return np.zeros(0)
        return np.concatenate([np.ravel(np.asarray(m, dtype=np.float64)) for m in self.inputs])


@dataclass(frozen=True)
class TransitionRecord:
    x: np.ndarray
    a: int
    r: float
    x_next: np.ndarray
    a_next: int
    terminal: bool
    hidden: Optional[Tuple[np.ndarray, np.ndarray]] = None


@dataclass(frozen=True)
class AgentStateLayout:
    obs_dim: int
    aux_dims: Tuple[int, ...]
    n_actions: int
    mode: CompositionMode

    @property
    def dim(self) -> int:
        if self.mode is CompositionMode.OBS_ONLY:
            return self.obs_dim
        if self.mode is CompositionMode.AUX_ONLY:
            return sum(self.aux_dims)
        extra = self.n_actions if self.mode is CompositionMode.OBS_AUX_ONEHOT else 0
        return self.obs_dim + sum(self.aux_dims) + extra

    def build(self, obs, action_prev: Optional[int], aux: AuxiliaryInputSet) -> np.ndarray:
        return build_agent_state(obs, action_prev, aux, self.mode, self.n_actions, layout=self)


def build_agent_state(
    obs,
    action_prev: Optional[int],
    aux: AuxiliaryInputSet,
    mode,
    n_actions: int = 0,
    layout: Optional[AgentStateLayout] = None,
) -> np.ndarray:
    mode = CompositionMode.parse(mode)
    obs_vec = np.ravel(np.asarray(obs, dtype=np.float64))
    if layout is not None:
        if obs_vec.size != layout.obs_dim:
            raise ConfigError(
                f"Observation has {obs_vec.size} entries, layout expects {layout.obs_dim}"
            )
        if aux.dims != layout.aux_dims:
            raise ConfigError(f"Auxiliary inputs have dims {aux.dims}, layout expects {layout.aux_dims}")
    if mode is CompositionMode.OBS_ONLY:
        return obs_vec.copy()
    if mode is CompositionMode.AUX_ONLY:
        if not aux.inputs:
            raise ConfigError("aux-only composition needs at least one auxiliary input")
        return aux.flat()
    parts = [obs_vec, aux.flat()]
    if mode is CompositionMode.OBS_AUX_ONEHOT:
        if n_actions <= 0:
            raise ConfigError("one-hot action composition needs a positive action count")
        onehot = np.zeros(n_actions)
        if action_prev is not None:
            if not 0 <= action_prev < n_actions:
                raise ConfigError(f"Previous action {action_prev} outside 0..{n_actions - 1}")
            onehot[action_prev] = 1.0
        parts.append(onehot)
    return np.concatenate(parts)


def _label_key(label: str) -> int:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


class RngStream:
    """Counter-based random stream addressed by a seed and a path of fork labels."""

    def __init__(self, seed: int, labels: Sequence[str] = ()):
        if not 0 <= int(seed) < 2**64:
            raise ConfigError(f"Seed {seed} is not a 64-bit unsigned integer", key="seeds")
        self.seed = int(seed)
        self.labels = tuple(labels)
        sequence = np.random.SeedSequence(
            self.seed, spawn_key=tuple(_label_key(label) for label in self.labels)
        )
        self.generator = np.random.Generator(np.random.Philox(sequence))

    @property
    def counter(self) -> int:
        state = self.generator.bit_generator.state["state"]["counter"]
        return int(sum(int(word) << (64 * i) for i, word in enumerate(state)))

    def random(self, size=None):
        return self.generator.random(size)

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size=size)

    def choice(self, a, size=None, replace=True, p=None):
        return self.generator.choice(a, size=size, replace=replace, p=p)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)

    def __repr__(self) -> str:
        path = "/".join(self.labels)
        return f"RngStream(seed={self.seed}, labels='{path}')"


def rng_fork(parent: RngStream, label: str) -> RngStream:
    if not label:
        raise ConfigError("RNG fork label must be non-empty")
    return RngStream(parent.seed, parent.labels + (label,))


def one_hot(index: int, size: int) -> np.ndarray:
    vec = np.zeros(size)
    vec[index] = 1.0
    return vec
