from dataclasses import dataclass, field
from typing import FrozenSet, List, Optional, Tuple

import numpy as np

from ..core import ConfigError, RngStream
from .base import Environment, StepResult, poisson_event_probability

UP, RIGHT, DOWN, LEFT = 0, 1, 2, 3
DIRECTIONS = ("N", "E", "S", "W")
_DELTAS = ((0, -1), (1, 0), (0, 1), (-1, 0))
OBSTACLE_CHANNEL = 0
REWARD_CHANNEL = 5
N_CHANNELS = 6

Cell = Tuple[int, int]


@dataclass(frozen=True)
class RewardSpot:
    cell: Cell
    rate: float


@dataclass(frozen=True)
class Current:
    cell: Cell
    directions: Tuple[int, ...]
    initial: int
    rate: float


@dataclass(frozen=True)
class FishingLayout:
    size: int = 11
    start: Cell = (5, 5)
    slip: float = 0.1
    window: int = 5
    max_episode_steps: int = 1000
    walls: FrozenSet[Cell] = frozenset()
    glass: FrozenSet[Cell] = frozenset()
    rewards: Tuple[RewardSpot, ...] = ()
    currents: Tuple[Current, ...] = ()
    name: str = "fishing"

    @property
    def map_size(self) -> int:
        return 2 * self.size - 1

    @property
    def observation_dim(self) -> int:
        return self.map_size * self.map_size * N_CHANNELS

    def blocked(self, x: int, y: int) -> bool:
        if not (0 <= x < self.size and 0 <= y < self.size):
            return True
        return (x, y) in self.walls or (x, y) in self.glass

    def validate(self) -> "FishingLayout":
        solid = self.walls | self.glass
        for cell in [self.start] + [r.cell for r in self.rewards] + [c.cell for c in self.currents]:
            x, y = cell
            if not (0 <= x < self.size and 0 <= y < self.size):
                raise ConfigError(f"cell {cell} lies outside the {self.size}x{self.size} grid", key="env")
            if cell in solid:
                raise ConfigError(f"cell {cell} is inside a wall", key="env")
        for current in self.currents:
            if current.initial not in current.directions:
                raise ConfigError(f"current at {current.cell} starts in a disallowed direction", key="env")
        return self


@dataclass
class FishingState:
    x: int
    y: int
    current_dirs: np.ndarray
    reward_present: np.ndarray
    accumulated_map: np.ndarray
    observed: np.ndarray
    steps: int = 0
    last_visibility: Optional[np.ndarray] = field(default=None)


def line_cells(x0: int, y0: int, x1: int, y1: int) -> List[Cell]:
    """Bresenham cells from (x0, y0) to (x1, y1), endpoints included."""
    cells = []
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    x, y = x0, y0
    while True:
        cells.append((x, y))
        if x == x1 and y == y1:
            return cells
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy


def visibility_mask(layout: FishingLayout, x: int, y: int) -> np.ndarray:
    mask = np.zeros((layout.size, layout.size), dtype=bool)
    half = layout.window // 2
    for cy in range(y - half, y + half + 1):
        for cx in range(x - half, x + half + 1):
            if not (0 <= cx < layout.size and 0 <= cy < layout.size):
                continue
            between = line_cells(x, y, cx, cy)[1:-1]
            if not any(cell in layout.walls for cell in between):
                mask[cy, cx] = True
    return mask


def agent_centric(world: np.ndarray, x: int, y: int) -> np.ndarray:
    size = world.shape[0]
    half = size - 1
    padded = np.zeros((size + 2 * half, size + 2 * half) + world.shape[2:], dtype=world.dtype)
    padded[half:half + size, half:half + size] = world
    return padded[y:y + 2 * size - 1, x:x + 2 * size - 1]


def ground_truth_map(layout: FishingLayout, state: FishingState) -> np.ndarray:
    world = np.zeros((layout.size, layout.size, N_CHANNELS))
    for x, y in layout.walls | layout.glass:
        world[y, x, OBSTACLE_CHANNEL] = 1.0
    for i, current in enumerate(layout.currents):
        x, y = current.cell
        world[y, x, 1 + int(state.current_dirs[i])] = 1.0
    for i, spot in enumerate(layout.rewards):
        if state.reward_present[i]:
            x, y = spot.cell
            world[y, x, REWARD_CHANNEL] = 1.0
    return world


class _Visibility:
    def __init__(self, layout: FishingLayout):
        self.masks = np.zeros((layout.size, layout.size, layout.size, layout.size), dtype=bool)
        for y in range(layout.size):
            for x in range(layout.size):
                if not layout.blocked(x, y):
                    self.masks[y, x] = visibility_mask(layout, x, y)


def fishing_initial_state(layout: FishingLayout) -> FishingState:
    x, y = layout.start
    size = layout.size
    return FishingState(
        x=x,
        y=y,
        current_dirs=np.array([c.initial for c in layout.currents], dtype=np.int64),
        reward_present=np.ones(len(layout.rewards), dtype=bool),
        accumulated_map=np.zeros((size, size, N_CHANNELS)),
        observed=np.zeros((size, size), dtype=bool),
    )


def fishing_observe(state: FishingState, layout: FishingLayout, mask: Optional[np.ndarray] = None) -> np.ndarray:
    if mask is None:
        mask = visibility_mask(layout, state.x, state.y)
    truth = ground_truth_map(layout, state)
    state.accumulated_map[mask] = truth[mask]
    state.observed |= mask
    state.last_visibility = mask
    return agent_centric(state.accumulated_map, state.x, state.y).ravel()


def _collect(state: FishingState, layout: FishingLayout, collected: np.ndarray) -> float:
    reward = 0.0
    for i, spot in enumerate(layout.rewards):
        if spot.cell == (state.x, state.y) and state.reward_present[i]:
            state.reward_present[i] = False
            collected[i] = True
            reward += 1.0
    return reward


def fishing_step(
    state: FishingState,
    action: int,
    rng: RngStream,
    layout: FishingLayout,
    mask_lookup: Optional[np.ndarray] = None,
) -> Tuple[FishingState, float, np.ndarray, bool]:
    """Advances the state in place and returns it with the reward and new observation."""
    n_rewards, n_currents = len(layout.rewards), len(layout.currents)
    draws = rng.random(1 + n_rewards + 2 * n_currents)
    collected = np.zeros(n_rewards, dtype=bool)
    if draws[0] >= layout.slip:
        dx, dy = _DELTAS[action]
        if not layout.blocked(state.x + dx, state.y + dy):
            state.x, state.y = state.x + dx, state.y + dy
    reward = _collect(state, layout, collected)
    for i, current in enumerate(layout.currents):
        if current.cell == (state.x, state.y):
            dx, dy = _DELTAS[int(state.current_dirs[i])]
            if not layout.blocked(state.x + dx, state.y + dy):
                state.x, state.y = state.x + dx, state.y + dy
            reward += _collect(state, layout, collected)
            break
    regen = draws[1:1 + n_rewards]
    for i, spot in enumerate(layout.rewards):
        if not state.reward_present[i] and not collected[i]:
            if regen[i] < poisson_event_probability(spot.rate):
                state.reward_present[i] = True
    flips = draws[1 + n_rewards:].reshape(n_currents, 2) if n_currents else np.zeros((0, 2))
    for i, current in enumerate(layout.currents):
        others = [d for d in current.directions if d != state.current_dirs[i]]
        if others and flips[i, 0] < poisson_event_probability(current.rate):
            state.current_dirs[i] = others[min(int(flips[i, 1] * len(others)), len(others) - 1)]
    state.steps += 1
    mask = mask_lookup[state.y, state.x] if mask_lookup is not None else None
    return state, reward, fishing_observe(state, layout, mask), False


class FishingEnv(Environment):
    action_names = ("up", "right", "down", "left")

    def __init__(self, layout: FishingLayout):
        self.layout = layout.validate()
        self.name = layout.name
        self.observation_dim = layout.observation_dim
        self.max_episode_steps = layout.max_episode_steps
        self._visibility = _Visibility(layout)
        self.state = fishing_initial_state(layout)

    def reset(self, rng: RngStream) -> np.ndarray:
        self.state = fishing_initial_state(self.layout)
        mask = self._visibility.masks[self.state.y, self.state.x]
        return fishing_observe(self.state, self.layout, mask)

    def step(self, action: int, rng: RngStream) -> StepResult:
        action = self.check_action(action)
        _, reward, obs, terminal = fishing_step(
            self.state, action, rng, self.layout, self._visibility.masks
        )
        return StepResult(obs, reward, terminal)

    def state_features(self) -> np.ndarray:
        truth = ground_truth_map(self.layout, self.state)
        return agent_centric(truth, self.state.x, self.state.y).ravel()

    def ground_truth_map(self) -> np.ndarray:
        return ground_truth_map(self.layout, self.state)

    def agent_position(self) -> Cell:
        return self.state.x, self.state.y

    @property
    def last_visibility(self) -> np.ndarray:
        return self.state.last_visibility
