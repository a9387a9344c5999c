from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from ..core import RngStream
from .base import Environment, FilterModel, StepResult

NORTH, EAST, SOUTH, WEST = 0, 1, 2, 3
FORWARD, TURN_LEFT, TURN_RIGHT = 0, 1, 2
COLORS = ("orange", "yellow", "red", "blue", "green")
_DELTAS = ((0, -1), (1, 0), (0, 1), (-1, 0))


@dataclass(frozen=True)
class CompassParams:
    size: int = 7
    goal_row: int = 3
    max_episode_steps: int = 1000
    wall_colors: Tuple[str, str, str, str] = ("orange", "yellow", "red", "blue")
    goal_color: str = "green"

    @property
    def n_states(self) -> int:
        return self.size * self.size * 4

    @property
    def terminal_index(self) -> int:
        return CompassState(0, self.goal_row, WEST).index_for(self.size)


@dataclass(frozen=True)
class CompassState:
    x: int
    y: int
    pose: int

    def index_for(self, size: int) -> int:
        return (self.x * size + self.y) * 4 + self.pose

    @property
    def index(self) -> int:
        return self.index_for(7)

    @classmethod
    def from_index(cls, index: int, size: int = 7) -> "CompassState":
        cell, pose = divmod(index, 4)
        x, y = divmod(cell, size)
        return cls(x, y, pose)


def _advance(state: CompassState, action: int, params: CompassParams) -> CompassState:
    if action == TURN_LEFT:
        return CompassState(state.x, state.y, (state.pose - 1) % 4)
    if action == TURN_RIGHT:
        return CompassState(state.x, state.y, (state.pose + 1) % 4)
    dx, dy = _DELTAS[state.pose]
    nx, ny = state.x + dx, state.y + dy
    if 0 <= nx < params.size and 0 <= ny < params.size:
        return CompassState(nx, ny, state.pose)
    return state


def is_terminal(state: CompassState, params: CompassParams) -> bool:
    return state.x == 0 and state.y == params.goal_row and state.pose == WEST


def compass_observation(state: CompassState, params: Optional[CompassParams] = None) -> np.ndarray:
    params = params or CompassParams()
    obs = np.zeros(len(COLORS))
    dx, dy = _DELTAS[state.pose]
    ahead_x, ahead_y = state.x + dx, state.y + dy
    if 0 <= ahead_x < params.size and 0 <= ahead_y < params.size:
        return obs
    if is_terminal(state, params):
        color = params.goal_color
    else:
        color = params.wall_colors[state.pose]
    obs[COLORS.index(color)] = 1.0
    return obs


def compass_step(
    state: CompassState, action: int, params: Optional[CompassParams] = None
) -> Tuple[CompassState, float, np.ndarray, bool]:
    params = params or CompassParams()
    if is_terminal(state, params):
        return state, 0.0, compass_observation(state, params), True
    nxt = _advance(state, action, params)
    terminal = is_terminal(nxt, params)
    return nxt, 1.0 if terminal else 0.0, compass_observation(nxt, params), terminal


class CompassFilterModel(FilterModel):
    def __init__(self, params: CompassParams):
        self.params = params
        self.n_states = params.n_states
        states = [CompassState.from_index(s, params.size) for s in range(self.n_states)]
        self._next = np.array(
            [[_advance(s, a, params).index_for(params.size) if not is_terminal(s, params) else i
              for i, s in enumerate(states)] for a in range(3)]
        )
        self._observations = np.stack([compass_observation(s, params) for s in states])

    def start_distribution(self) -> np.ndarray:
        dist = np.ones(self.n_states)
        dist[self.params.terminal_index] = 0.0
        return dist / dist.sum()

    def propagate(self, states, action, obs, rng):
        states = np.asarray(states)
        return self._next[action][states], np.ones(states.shape)

    def emission(self, obs, states, action):
        return np.all(self._observations[np.asarray(states)] == np.asarray(obs), axis=1).astype(np.float64)

    def transition_matrix(self, action, obs=None):
        P = np.zeros((self.n_states, self.n_states))
        P[np.arange(self.n_states), self._next[action]] = 1.0
        return P


class CompassEnv(Environment):
    name = "compass"
    action_names = ("forward", "turn_left", "turn_right")
    observation_dim = len(COLORS)

    def __init__(self, params: Optional[CompassParams] = None):
        self.params = params or CompassParams()
        self.max_episode_steps = self.params.max_episode_steps
        self.state = CompassState(self.params.size - 1, 0, NORTH)
        self._start_states = [
            s for s in range(self.params.n_states) if s != self.params.terminal_index
        ]

    def reset(self, rng: RngStream) -> np.ndarray:
        pick = int(rng.integers(len(self._start_states)))
        self.state = CompassState.from_index(self._start_states[pick], self.params.size)
        return compass_observation(self.state, self.params)

    def step(self, action: int, rng: RngStream) -> StepResult:
        action = self.check_action(action)
        self.state, reward, obs, terminal = compass_step(self.state, action, self.params)
        return StepResult(obs, reward, terminal)

    def state_features(self) -> np.ndarray:
        feats = np.zeros(self.params.n_states)
        feats[self.state_index()] = 1.0
        return feats

    def state_index(self) -> int:
        return self.state.index_for(self.params.size)

    def enumerate_states(self) -> List[CompassState]:
        return [CompassState.from_index(s, self.params.size) for s in range(self.params.n_states)]

    def filter_model(self) -> CompassFilterModel:
        return CompassFilterModel(self.params)

    def tabular_model(self) -> Tuple[np.ndarray, np.ndarray]:
        n = self.params.n_states
        model = CompassFilterModel(self.params)
        P = np.stack([model.transition_matrix(a) for a in range(3)], axis=1)
        R = np.zeros((n, 3, n))
        terminal = self.params.terminal_index
        R[:, :, terminal] = 1.0
        R[terminal, :, :] = 0.0
        return P, R
