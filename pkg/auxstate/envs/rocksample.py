from dataclasses import dataclass, replace
from typing import List, Optional, Tuple

import numpy as np

from ..core import ConfigError, RngStream
from .base import Environment, FilterModel, StepResult

UP, RIGHT, DOWN, LEFT, SAMPLE = 0, 1, 2, 3, 4
CHECK_BASE = 5
_DELTAS = {UP: (0, -1), RIGHT: (1, 0), DOWN: (0, 1), LEFT: (-1, 0)}


def sensor_accuracy(distance: float, half_efficiency_distance: float) -> float:
    return 0.5 * (1.0 + 2.0 ** (-distance / half_efficiency_distance))


@dataclass(frozen=True)
class RockSampleLayout:
    size: int = 7
    n_rocks: int = 8
    rock_positions: Optional[Tuple[Tuple[int, int], ...]] = None
    start: Tuple[int, int] = (0, 3)
    half_efficiency_distance: float = 5.0
    exit_reward: float = 10.0
    good_reward: float = 10.0
    bad_reward: float = -10.0
    max_episode_steps: int = 1000

    def with_positions(self, rng: RngStream) -> "RockSampleLayout":
        if self.rock_positions is not None:
            positions = tuple((int(x), int(y)) for x, y in self.rock_positions)
            if len(set(positions)) != len(positions) or len(positions) != self.n_rocks:
                raise ConfigError("rock_positions must list distinct cells, one per rock",
                                  key="env.rock_positions")
            return replace(self, rock_positions=positions)
        cells = rng.choice(self.size * self.size, size=self.n_rocks, replace=False)
        return replace(self, rock_positions=tuple((int(c) % self.size, int(c) // self.size) for c in cells))

    @property
    def n_actions(self) -> int:
        return CHECK_BASE + self.n_rocks

    @property
    def observation_dim(self) -> int:
        return 2 * self.size + self.n_rocks


@dataclass(frozen=True)
class RockSampleState:
    x: int
    y: int
    moralities: Tuple[bool, ...]
    collected: Tuple[bool, ...]
    readings: Tuple[float, ...]

    @property
    def morality_index(self) -> int:
        return sum(1 << i for i, good in enumerate(self.moralities) if good)


def rocksample_observation(state: RockSampleState, layout: RockSampleLayout) -> np.ndarray:
    obs = np.zeros(layout.observation_dim)
    obs[state.x] = 1.0
    obs[layout.size + state.y] = 1.0
    obs[2 * layout.size:] = state.readings
    return obs


def _rock_at(layout: RockSampleLayout, x: int, y: int) -> Optional[int]:
    for i, pos in enumerate(layout.rock_positions or ()):
        if pos == (x, y):
            return i
    return None


def rocksample_step(
    state: RockSampleState, action: int, rng: RngStream, layout: RockSampleLayout
) -> Tuple[RockSampleState, float, np.ndarray, bool]:
    if action in _DELTAS:
        dx, dy = _DELTAS[action]
        nx, ny = state.x + dx, state.y + dy
        if nx >= layout.size:
            return state, layout.exit_reward, rocksample_observation(state, layout), True
        nx = min(max(nx, 0), layout.size - 1)
        ny = min(max(ny, 0), layout.size - 1)
        nxt = replace(state, x=nx, y=ny)
        return nxt, 0.0, rocksample_observation(nxt, layout), False
    if action == SAMPLE:
        rock = _rock_at(layout, state.x, state.y)
        if rock is None:
            return state, 0.0, rocksample_observation(state, layout), False
        reward = layout.good_reward if state.moralities[rock] else layout.bad_reward
        moralities = list(state.moralities)
        collected = list(state.collected)
        moralities[rock] = False
        collected[rock] = True
        nxt = replace(state, moralities=tuple(moralities), collected=tuple(collected))
        return nxt, reward, rocksample_observation(nxt, layout), False
    rock = action - CHECK_BASE
    if not 0 <= rock < layout.n_rocks:
        raise ValueError(f"rocksample: action {action} outside 0..{layout.n_actions - 1}")
    rx, ry = layout.rock_positions[rock]
    distance = float(np.hypot(rx - state.x, ry - state.y))
    truthful = rng.random() < sensor_accuracy(distance, layout.half_efficiency_distance)
    good = state.moralities[rock]
    reading = good if truthful else not good
    readings = list(state.readings)
    readings[rock] = 1.0 if reading else 0.0
    nxt = replace(state, readings=tuple(readings))
    return nxt, 0.0, rocksample_observation(nxt, layout), False


class RockSampleMoralityModel(FilterModel):
    """Belief model over the 2^n morality subspace; agent position comes from each observation."""

    def __init__(self, layout: RockSampleLayout):
        self.layout = layout
        self.n_states = 2 ** layout.n_rocks
        self._all = np.arange(self.n_states)

    def _position(self, obs) -> Tuple[int, int]:
        size = self.layout.size
        return int(np.argmax(obs[:size])), int(np.argmax(obs[size:2 * size]))

    def start_distribution(self) -> np.ndarray:
        return np.full(self.n_states, 1.0 / self.n_states)

    def _apply(self, states: np.ndarray, action: int, obs) -> np.ndarray:
        if action != SAMPLE:
            return states
        rock = _rock_at(self.layout, *self._position(obs))
        if rock is None:
            return states
        return states & ~(1 << rock)

    def propagate(self, states, action, obs, rng):
        states = np.asarray(states)
        return self._apply(states, action, obs), np.ones(states.shape)

    def emission(self, obs, states, action):
        states = np.asarray(states)
        if action < CHECK_BASE:
            return np.ones(states.shape)
        rock = action - CHECK_BASE
        x, y = self._position(obs)
        rx, ry = self.layout.rock_positions[rock]
        accuracy = sensor_accuracy(float(np.hypot(rx - x, ry - y)), self.layout.half_efficiency_distance)
        reading = obs[2 * self.layout.size + rock]
        good = (states >> rock) & 1
        return np.where(good == reading, accuracy, 1.0 - accuracy)

    def transition_matrix(self, action, obs=None):
        targets = self._apply(self._all, action, obs) if obs is not None else self._all
        P = np.zeros((self.n_states, self.n_states))
        P[self._all, targets] = 1.0
        return P

    def belief_features(self, belief: np.ndarray) -> np.ndarray:
        bits = (self._all[:, None] >> np.arange(self.layout.n_rocks)) & 1
        return belief @ bits


class RockSampleEnv(Environment):
    name = "rocksample"

    def __init__(self, layout: RockSampleLayout, rng: RngStream):
        self.layout = layout.with_positions(rng)
        self.action_names = ("up", "right", "down", "left", "sample") + tuple(
            f"check_{i + 1}" for i in range(self.layout.n_rocks)
        )
        self.observation_dim = self.layout.observation_dim
        self.max_episode_steps = self.layout.max_episode_steps
        self.state = self._initial_state(tuple(True for _ in range(self.layout.n_rocks)))

    def _initial_state(self, moralities: Tuple[bool, ...]) -> RockSampleState:
        n = self.layout.n_rocks
        x, y = self.layout.start
        return RockSampleState(x, y, moralities, (False,) * n, (0.5,) * n)

    def reset(self, rng: RngStream) -> np.ndarray:
        draws = rng.random(self.layout.n_rocks)
        self.state = self._initial_state(tuple(bool(u < 0.5) for u in draws))
        return rocksample_observation(self.state, self.layout)

    def step(self, action: int, rng: RngStream) -> StepResult:
        action = self.check_action(action)
        self.state, reward, obs, terminal = rocksample_step(self.state, action, rng, self.layout)
        return StepResult(obs, reward, terminal)

    def state_features(self) -> np.ndarray:
        size = self.layout.size
        feats = np.zeros(2 * size + self.layout.n_rocks)
        feats[self.state.x] = 1.0
        feats[size + self.state.y] = 1.0
        feats[2 * size:] = [1.0 if good else 0.0 for good in self.state.moralities]
        return feats

    def enumerate_states(self) -> List[Tuple[bool, ...]]:
        n = self.layout.n_rocks
        return [tuple(bool((s >> i) & 1) for i in range(n)) for s in range(2 ** n)]

    def filter_model(self) -> RockSampleMoralityModel:
        return RockSampleMoralityModel(self.layout)

    def belief_observation(self, obs: np.ndarray) -> np.ndarray:
        return np.asarray(obs[: 2 * self.layout.size])

    def state_index(self) -> int:
        return self.state.morality_index
