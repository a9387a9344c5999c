from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from ..core import RngStream


class UnsupportedOperation(Exception):
    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


@dataclass(frozen=True)
class StepResult:
    observation: np.ndarray
    reward: float
    terminal: bool


class FilterModel(ABC):
    """Ground-truth dynamics over an enumerated state space, as seen by a belief filter."""

    n_states: int

    @abstractmethod
    def start_distribution(self) -> np.ndarray:
        ...

    @abstractmethod
    def propagate(
        self, states: np.ndarray, action: int, obs: np.ndarray, rng: RngStream
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Returns successor particles and the factor each weight is multiplied by."""

    @abstractmethod
    def emission(self, obs: np.ndarray, states: np.ndarray, action: int) -> np.ndarray:
        ...

    @abstractmethod
    def transition_matrix(self, action: int, obs: Optional[np.ndarray] = None) -> np.ndarray:
        ...

    def belief_features(self, belief: np.ndarray) -> np.ndarray:
        return belief


class Environment(ABC):
    name: str = ""
    observation_dim: int = 0
    action_names: Tuple[str, ...] = ()
    max_episode_steps: int = 1000
    continuing: bool = False

    @property
    def n_actions(self) -> int:
        return len(self.action_names)

    def check_action(self, action: int) -> int:
        if not 0 <= action < self.n_actions:
            raise ValueError(f"{self.name}: action {action} outside 0..{self.n_actions - 1}")
        return int(action)

    @abstractmethod
    def reset(self, rng: RngStream) -> np.ndarray:
        ...

    @abstractmethod
    def step(self, action: int, rng: RngStream) -> StepResult:
        ...

    @abstractmethod
    def state_features(self) -> np.ndarray:
        ...

    def enumerate_states(self) -> List:
        raise UnsupportedOperation(f"{self.name} has no enumerable state space")

    def filter_model(self) -> FilterModel:
        raise UnsupportedOperation(f"{self.name} has no belief-filter model")

    def belief_observation(self, obs: np.ndarray) -> np.ndarray:
        return np.zeros(0)


def enumerate_states(env: Environment) -> List:
    return env.enumerate_states()


def poisson_event_probability(rate: float) -> float:
    return float(-np.expm1(-1.0 / rate))
