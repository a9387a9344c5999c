import copy
from typing import Dict, Optional

import numpy as np

from ..core import RngStream, TransitionRecord, one_hot
from .approximators import LinearQ, QFunction, RecurrentQ
from .optim import SgdState
from .replay import ReplayBuffer
from .sarsa import epsilon_greedy, sarsa_linear_update, semi_gradient_update, tbptt_update


class Agent:
    epsilon: float = 0.0
    learning: bool = True

    def begin_episode(self, obs, env) -> int:
        raise NotImplementedError

    def step(self, reward: float, obs, terminal: bool, env) -> Optional[int]:
        raise NotImplementedError

    @property
    def params(self) -> Dict[str, np.ndarray]:
        return {}

    @property
    def depletions(self) -> int:
        return 0

    def evaluation_copy(self, rng: RngStream) -> "Agent":
        raise NotImplementedError


class SarsaAgent(Agent):
    """Semi-gradient Sarsa(0), updated online or from uniform replay batches."""

    def __init__(self, state_fn, qf: QFunction, optimizer, epsilon: float, gamma: float, rng: RngStream,
                 replay: Optional[ReplayBuffer] = None, batch: int = 64, updates_per_step: int = 1):
        self.state_fn = state_fn
        self.qf = qf
        self.optimizer = optimizer
        self.epsilon = epsilon
        self.gamma = gamma
        self.rng = rng
        self.replay = replay
        self.batch = batch
        self.updates_per_step = updates_per_step
        self.episode = -1
        self.x: Optional[np.ndarray] = None
        self.action: Optional[int] = None

    @property
    def params(self):
        return self.qf.params

    @property
    def depletions(self) -> int:
        return self.state_fn.depletions

    def _act(self, x) -> int:
        return epsilon_greedy(self.qf.q_values(x), self.epsilon, self.rng)

    def begin_episode(self, obs, env) -> int:
        self.episode += 1
        self.x = self.state_fn.reset(obs, env)
        self.action = self._act(self.x)
        return self.action

    def step(self, reward, obs, terminal, env):
        x_next = self.state_fn.update(self.action, obs, env)
        a_next = None if terminal else self._act(x_next)
        if self.learning:
            record = TransitionRecord(self.x, self.action, float(reward), x_next,
                                      a_next if a_next is not None else 0, bool(terminal))
            self._learn(record)
        self.x, self.action = x_next, a_next
        return a_next

    def _learn(self, record: TransitionRecord) -> None:
        if self.replay is None:
            if isinstance(self.qf, LinearQ) and isinstance(self.optimizer, SgdState):
                theta = sarsa_linear_update(self.qf.theta, record.x, record.a, record.r, record.x_next,
                                            record.a_next, record.terminal, self.optimizer.alpha, self.gamma)
                self.qf.params["theta"][...] = theta
            else:
                semi_gradient_update(self.qf, self.optimizer, [record], self.gamma)
            return
        self.replay.add(record, self.episode)
        if len(self.replay) < self.batch:
            return
        for _ in range(self.updates_per_step):
            semi_gradient_update(self.qf, self.optimizer, self.replay.sample(self.batch, self.rng), self.gamma)

    def evaluation_copy(self, rng: RngStream) -> "SarsaAgent":
        twin = SarsaAgent(copy.deepcopy(self.state_fn), self.qf, self.optimizer, 0.0, self.gamma, rng)
        twin.learning = False
        return twin


class RecurrentAgent(Agent):
    """LSTM agent trained by truncated backpropagation through time over replayed windows."""

    def __init__(self, state_fn, net: RecurrentQ, optimizer, epsilon: float, gamma: float, rng: RngStream,
                 replay: ReplayBuffer, batch: int = 64, truncation: int = 10, action_concat: bool = True,
                 updates_per_step: int = 1, n_actions: int = 0):
        self.state_fn = state_fn
        self.net = net
        self.optimizer = optimizer
        self.epsilon = epsilon
        self.gamma = gamma
        self.rng = rng
        self.replay = replay
        self.batch = batch
        self.truncation = truncation
        self.action_concat = action_concat
        self.updates_per_step = updates_per_step
        self.n_actions = n_actions or net.n_actions
        self.episode = -1
        self.hidden = net.initial_hidden()
        self.u: Optional[np.ndarray] = None
        self.hidden_before: Optional[tuple] = None
        self.action: Optional[int] = None

    @property
    def params(self):
        return self.net.params

    @property
    def depletions(self) -> int:
        return self.state_fn.depletions

    def input_for(self, x, previous_action: Optional[int]) -> np.ndarray:
        if not self.action_concat:
            return np.asarray(x, dtype=np.float64)
        action = np.zeros(self.n_actions) if previous_action is None else one_hot(previous_action, self.n_actions)
        return np.concatenate([np.asarray(x, dtype=np.float64), action])

    def _consume(self, u) -> int:
        self.hidden_before = self.hidden
        q, self.hidden = self.net.step(u, self.hidden)
        return epsilon_greedy(q, self.epsilon, self.rng)

    def begin_episode(self, obs, env) -> int:
        self.episode += 1
        self.hidden = self.net.initial_hidden()
        self.u = self.input_for(self.state_fn.reset(obs, env), None)
        self.action = self._consume(self.u)
        return self.action

    def step(self, reward, obs, terminal, env):
        u_next = self.input_for(self.state_fn.update(self.action, obs, env), self.action)
        hidden_before = self.hidden_before
        a_next = None if terminal else self._consume(u_next)
        if self.learning:
            record = TransitionRecord(self.u, self.action, float(reward), u_next,
                                      a_next if a_next is not None else 0, bool(terminal),
                                      hidden=hidden_before)
            self.replay.add(record, self.episode)
            if len(self.replay) >= self.batch:
                for _ in range(self.updates_per_step):
                    windows = self.replay.sample_windows(self.batch, self.truncation, self.rng)
                    tbptt_update(self.net, windows, self.truncation, self.gamma, self.optimizer)
        self.u, self.action = u_next, a_next
        return a_next

    def evaluation_copy(self, rng: RngStream) -> "RecurrentAgent":
        twin = RecurrentAgent(copy.deepcopy(self.state_fn), self.net, self.optimizer, 0.0, self.gamma, rng,
                              self.replay, self.batch, self.truncation, self.action_concat,
                              n_actions=self.n_actions)
        twin.learning = False
        return twin


class PlanningAgent(Agent):
    """Acts greedily on the true environment state under a precomputed tabular policy."""

    learning = False

    def __init__(self, policy: np.ndarray, q_values: Optional[np.ndarray] = None):
        self.policy = np.asarray(policy)
        self.q_values = q_values

    @property
    def params(self):
        return {"policy": self.policy}

    def begin_episode(self, obs, env) -> int:
        return int(self.policy[env.state_index()])

    def step(self, reward, obs, terminal, env):
        return None if terminal else int(self.policy[env.state_index()])

    def evaluation_copy(self, rng: RngStream) -> "PlanningAgent":
        return self
