from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from ..core import RngStream
from .base import Environment, FilterModel, StepResult, poisson_event_probability

LEFT, RIGHT, COLLECT = 0, 1, 2
N_LOCATIONS = 3
N_STATES = 12
OBS_DIM = 9

# location reached by a successful move, indexed [action][location]
_MOVE_TARGET = np.array([[1, 1, 0], [2, 0, 2]])


@dataclass(frozen=True)
class LobsterState:
    location: int = 0
    reward1_present: bool = True
    reward2_present: bool = True

    @property
    def index(self) -> int:
        return self.location * 4 + int(self.reward1_present) * 2 + int(self.reward2_present)

    @classmethod
    def from_index(cls, index: int) -> "LobsterState":
        return cls(index // 4, bool((index >> 1) & 1), bool(index & 1))


@dataclass(frozen=True)
class LobsterParams:
    move_success: float = 0.6
    regen_mean: float = 10.0
    start: LobsterState = field(default_factory=LobsterState)
    max_episode_steps: int = 200

    @property
    def regen_probability(self) -> float:
        return poisson_event_probability(self.regen_mean)


def _decode(indices: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    indices = np.asarray(indices)
    return indices // 4, (indices >> 1) & 1, indices & 1


def _advance(indices, action: int, uniforms: np.ndarray, params: LobsterParams):
    """Vectorised Lobster transition; uniforms has shape (n, 3)."""
    loc, r1, r2 = _decode(indices)
    reward = np.zeros(loc.shape)
    if action == COLLECT:
        take1 = (loc == 1) & (r1 == 1)
        take2 = (loc == 2) & (r2 == 1)
        reward = (take1 | take2).astype(np.float64)
        r1_after = np.where(take1, 0, r1)
        r2_after = np.where(take2, 0, r2)
        new_loc = loc
    else:
        moved = uniforms[:, 0] < params.move_success
        new_loc = np.where(moved, _MOVE_TARGET[action][loc], loc)
        r1_after, r2_after = r1, r2
    q = params.regen_probability
    r1_next = np.where((r1 == 0) & (uniforms[:, 1] < q), 1, r1_after)
    r2_next = np.where((r2 == 0) & (uniforms[:, 2] < q), 1, r2_after)
    return new_loc * 4 + r1_next * 2 + r2_next, reward


def lobster_observation(state: LobsterState) -> np.ndarray:
    obs = np.zeros(OBS_DIM)
    obs[state.location] = 1.0
    for i, present in ((1, state.reward1_present), (2, state.reward2_present)):
        base = 3 * i
        if state.location != i:
            obs[base + 2] = 1.0
        elif present:
            obs[base + 1] = 1.0
        else:
            obs[base] = 1.0
    return obs


_OBSERVATION_TABLE = np.stack([lobster_observation(LobsterState.from_index(s)) for s in range(N_STATES)])


def lobster_step(
    state: LobsterState, action: int, rng: RngStream, params: Optional[LobsterParams] = None
) -> Tuple[LobsterState, float, np.ndarray]:
    params = params or LobsterParams()
    uniforms = np.asarray(rng.random(3)).reshape(1, 3)
    nxt, reward = _advance(np.array([state.index]), action, uniforms, params)
    new_state = LobsterState.from_index(int(nxt[0]))
    return new_state, float(reward[0]), lobster_observation(new_state)


def lobster_transition_tensor(params: LobsterParams) -> Tuple[np.ndarray, np.ndarray]:
    """Analytic P[s, a, s'] and R[s, a, s'] over the 12 enumerated states."""
    P = np.zeros((N_STATES, 3, N_STATES))
    R = np.zeros((N_STATES, 3, N_STATES))
    q = params.regen_probability
    p = params.move_success
    for s in range(N_STATES):
        loc, r1, r2 = (int(v) for v in _decode(np.array(s)))
        for a in range(3):
            if a == COLLECT:
                outcomes = [(1.0, loc)]
                after = (0 if loc == 1 else r1, 0 if loc == 2 else r2)
                reward = float((loc == 1 and r1 == 1) or (loc == 2 and r2 == 1))
            else:
                target = int(_MOVE_TARGET[a][loc])
                outcomes = [(p, target), (1.0 - p, loc)] if target != loc else [(1.0, loc)]
                after = (r1, r2)
                reward = 0.0
            regen1 = [(q, 1), (1.0 - q, after[0])] if r1 == 0 else [(1.0, after[0])]
            regen2 = [(q, 1), (1.0 - q, after[1])] if r2 == 0 else [(1.0, after[1])]
            for p_loc, l_next in outcomes:
                for p1, v1 in regen1:
                    for p2, v2 in regen2:
                        P[s, a, l_next * 4 + v1 * 2 + v2] += p_loc * p1 * p2
            R[s, a, :] = reward
    return P, R


class LobsterFilterModel(FilterModel):
    n_states = N_STATES

    def __init__(self, params: LobsterParams):
        self.params = params
        self._transitions, _ = lobster_transition_tensor(params)

    def start_distribution(self) -> np.ndarray:
        dist = np.zeros(N_STATES)
        dist[self.params.start.index] = 1.0
        return dist

    def propagate(self, states, action, obs, rng):
        """Samples successors among states that emit obs; each factor is P(obs | particle, action)."""
        states = np.asarray(states)
        prior = self._transitions[states, action, :]
        consistent = self.emission(obs, np.arange(N_STATES), action)
        proposal = prior * consistent
        likelihood = proposal.sum(axis=1)
        # dead particles still land on an observation-consistent state, at zero weight
        fallback = consistent if consistent.any() else np.ones(N_STATES)
        proposal = np.where(likelihood[:, None] > 0.0, proposal, fallback)
        cdf = np.cumsum(proposal / proposal.sum(axis=1, keepdims=True), axis=1)
        uniforms = np.asarray(rng.random(len(states)))
        nxt = np.minimum((cdf < uniforms[:, None]).sum(axis=1), N_STATES - 1)
        return nxt, likelihood

    def emission(self, obs, states, action):
        return np.all(_OBSERVATION_TABLE[np.asarray(states)] == np.asarray(obs), axis=1).astype(np.float64)

    def transition_matrix(self, action, obs=None):
        return self._transitions[:, action, :]


class LobsterEnv(Environment):
    name = "lobster"
    observation_dim = OBS_DIM
    action_names = ("left", "right", "collect")
    continuing = True

    def __init__(self, params: Optional[LobsterParams] = None):
        self.params = params or LobsterParams()
        self.max_episode_steps = self.params.max_episode_steps
        self.state = self.params.start

    def reset(self, rng: RngStream) -> np.ndarray:
        self.state = self.params.start
        return lobster_observation(self.state)

    def step(self, action: int, rng: RngStream) -> StepResult:
        action = self.check_action(action)
        self.state, reward, obs = lobster_step(self.state, action, rng, self.params)
        return StepResult(obs, reward, False)

    def state_features(self) -> np.ndarray:
        feats = np.zeros(N_STATES)
        feats[self.state.index] = 1.0
        return feats

    def enumerate_states(self) -> List[LobsterState]:
        return [LobsterState.from_index(s) for s in range(N_STATES)]

    def filter_model(self) -> LobsterFilterModel:
        return LobsterFilterModel(self.params)

    def tabular_model(self) -> Tuple[np.ndarray, np.ndarray]:
        return lobster_transition_tensor(self.params)

    def state_index(self) -> int:
        return self.state.index
