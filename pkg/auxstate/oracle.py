import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .core import ConfigError, RngStream
from .envs.base import Environment, FilterModel, UnsupportedOperation
from .envs.lobster import LEFT, RIGHT, LobsterParams, lobster_transition_tensor

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TabularMdp:
    transitions: np.ndarray
    rewards: np.ndarray
    gamma: float

    def __post_init__(self):
        if self.transitions.shape != self.rewards.shape or self.transitions.ndim != 3:
            raise ConfigError("transition and reward tensors must share shape [S, A, S]")
        if not np.allclose(self.transitions.sum(axis=2), 1.0, atol=1e-12, rtol=0.0):
            raise ConfigError("transition rows must sum to 1")

    @property
    def n_states(self) -> int:
        return self.transitions.shape[0]

    def backup(self, values: np.ndarray) -> np.ndarray:
        return np.sum(self.transitions * (self.rewards + self.gamma * values[None, None, :]), axis=2)


@dataclass(frozen=True)
class ValueIterationResult:
    values: np.ndarray
    policy: np.ndarray
    q_values: np.ndarray
    sweeps: int


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    returns: Tuple[float, ...]


def tabular_mdp(env: Environment, gamma: float) -> TabularMdp:
    builder = getattr(env, "tabular_model", None)
    if builder is None:
        raise UnsupportedOperation(f"{env.name} has no tabular model")
    P, R = builder()
    return TabularMdp(P, R, gamma)


def value_iteration(mdp: TabularMdp, theta: float = 1e-10, max_sweeps: int = 100000) -> ValueIterationResult:
    if mdp.gamma >= 1.0:
        raise ConfigError(f"value iteration needs gamma < 1, got {mdp.gamma}", key="learn.gamma")
    if theta <= 0:
        raise ConfigError("stopping threshold must be positive")
    values = np.zeros(mdp.n_states)
    for sweep in range(1, max_sweeps + 1):
        q = mdp.backup(values)
        updated = q.max(axis=1)
        delta = np.max(np.abs(updated - values))
        values = updated
        if delta < theta:
            break
    q = mdp.backup(values)
    return ValueIterationResult(values, q.argmax(axis=1), q, sweep)


def exact_filter(
    model: FilterModel, b0, actions: Sequence[int], observations: Sequence
) -> List[np.ndarray]:
    belief = np.asarray(b0, dtype=np.float64)
    beliefs = []
    states = np.arange(model.n_states)
    for action, obs in zip(actions, observations):
        obs = np.asarray(obs)
        posterior = model.emission(obs, states, action) * (model.transition_matrix(action, obs).T @ belief)
        total = posterior.sum()
        belief = posterior / total if total > 0 else np.full(model.n_states, 1.0 / model.n_states)
        beliefs.append(belief)
    return beliefs


def hitting_time(transitions: np.ndarray, targets: Sequence[int]) -> np.ndarray:
    P = np.asarray(transitions, dtype=np.float64)
    n = P.shape[0]
    target = np.zeros(n, dtype=bool)
    target[list(targets)] = True
    finite = np.ones(n, dtype=bool)
    while True:
        reach = target.copy()
        grown = True
        while grown:
            extended = reach | (finite & (P[:, reach].sum(axis=1) > 0))
            grown = bool((extended & ~reach).any())
            reach = extended
        # a state that may step outside the reaching set has infinite expected time
        leaks = ~target & (P[:, ~reach].sum(axis=1) > 0)
        settled = reach & ~leaks
        if (settled == finite).all():
            break
        finite = settled
    h = np.full(n, np.inf)
    h[target] = 0.0
    solve = finite & ~target
    if solve.any():
        idx = np.flatnonzero(solve)
        A = np.eye(len(idx)) - P[np.ix_(idx, idx)]
        h[idx] = np.linalg.solve(A, np.ones(len(idx)))
    unreachable = np.flatnonzero(~finite)
    if len(unreachable):
        logger.warning("states %s cannot reach the target set surely; hitting time is infinite",
                       unreachable.tolist())
    return h


def lobster_hitting_times(params: Optional[LobsterParams] = None) -> np.ndarray:
    """Expected steps to L1 under always-left and to L2 under always-right, per location."""
    params = params or LobsterParams()
    P, _ = lobster_transition_tensor(params)
    table = np.zeros((2, 3))
    for slot, (action, target) in enumerate(((LEFT, 1), (RIGHT, 2))):
        # location chain from the states with both pots present; pots never affect movement
        chain = np.zeros((3, 3))
        for loc in range(3):
            row = P[loc * 4 + 3, action]
            chain[loc] = [row[l * 4:(l + 1) * 4].sum() for l in range(3)]
        table[slot] = hitting_time(chain, [target])
    return table


def mc_evaluate(
    env: Environment,
    policy: Callable[[Environment, np.ndarray, RngStream], int],
    episodes: int,
    horizon: int,
    rng: RngStream,
    gamma: Optional[float] = None,
) -> McEstimate:
    returns = []
    for _ in range(episodes):
        obs = env.reset(rng)
        total, discount = 0.0, 1.0
        for _ in range(horizon):
            result = env.step(policy(env, obs, rng), rng)
            total += discount * result.reward
            if gamma is not None:
                discount *= gamma
            obs = result.observation
            if result.terminal:
                break
        returns.append(total)
    values = np.asarray(returns)
    stderr = float(values.std(ddof=1) / math.sqrt(len(values))) if len(values) > 1 else 0.0
    return McEstimate(float(values.mean()), stderr, tuple(returns))


def greedy_state_policy(result: ValueIterationResult) -> Callable[[Environment, np.ndarray, RngStream], int]:
    def act(env: Environment, obs: np.ndarray, rng: RngStream) -> int:
        return int(result.policy[env.state_index()])

    return act


def random_policy(env: Environment, obs: np.ndarray, rng: RngStream) -> int:
    return int(rng.integers(env.n_actions))


def dump_mdp(env: Environment, gamma: float, path) -> Path:
    mdp = tabular_mdp(env, gamma)
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    labels = np.array([repr(s) for s in env.enumerate_states()])
    with open(out, "wb") as fh:
        np.savez(fh, transitions=mdp.transitions, rewards=mdp.rewards, gamma=mdp.gamma,
                 states=labels, actions=np.array(env.action_names))
    return out
