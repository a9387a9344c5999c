from typing import List, Sequence

import numpy as np

from ..core import ConfigError, RngStream, TransitionRecord
from .approximators import QFunction, RecurrentQ, stack_windows
from .optim import DivergenceError, optimizer_step


def sarsa_linear_update(theta: np.ndarray, x, a: int, r: float, x_next, a_next: int, terminal: bool,
                        alpha: float, gamma: float) -> np.ndarray:
    if alpha <= 0:
        raise ConfigError(f"step size {alpha} must be positive", key="learn.alpha")
    if not 0.0 <= gamma < 1.0:
        raise ConfigError(f"discount {gamma} outside [0, 1)", key="learn.gamma")
    x = np.asarray(x, dtype=theta.dtype)
    target = r if terminal else r + gamma * float(theta[a_next] @ np.asarray(x_next, dtype=theta.dtype))
    delta = target - float(theta[a] @ x)
    if not np.isfinite(delta):
        raise DivergenceError("non-finite TD error", {"action": a, "reward": r, "delta": delta})
    updated = theta.copy()
    updated[a] += alpha * delta * x
    return updated


def epsilon_greedy(q_values, epsilon: float, rng: RngStream) -> int:
    q = np.asarray(q_values)
    if q.size == 0:
        raise ValueError("epsilon_greedy needs at least one action value")
    if not 0.0 <= epsilon <= 1.0:
        raise ConfigError(f"exploration rate {epsilon} outside [0, 1]", key="learn.epsilon")
    explore = rng.random()
    if explore < epsilon:
        return int(rng.integers(q.size))
    best = np.flatnonzero(q == q.max())
    if len(best) == 1:
        return int(best[0])
    return int(best[rng.integers(len(best))])


def sarsa_targets(qf: QFunction, records: Sequence[TransitionRecord], gamma: float) -> np.ndarray:
    rewards = np.array([rec.r for rec in records], dtype=np.float64)
    live = np.array([not rec.terminal for rec in records])
    targets = rewards.copy()
    if live.any():
        following = np.stack([rec.x_next for rec, keep in zip(records, live) if keep])
        next_actions = np.array([rec.a_next for rec, keep in zip(records, live) if keep])
        q_next = qf.batch_q(following)
        targets[live] += gamma * q_next[np.arange(len(next_actions)), next_actions]
    return targets


def semi_gradient_update(qf: QFunction, optimizer, records: Sequence[TransitionRecord], gamma: float) -> float:
    """One semi-gradient Sarsa step over a batch; returns the mean squared TD error."""
    targets = sarsa_targets(qf, records, gamma)
    X = np.stack([rec.x for rec in records])
    actions = np.array([rec.a for rec in records])
    q, grads = qf.loss_gradients(X, actions, targets)
    errors = targets - q[np.arange(len(records)), actions]
    if not np.all(np.isfinite(errors)):
        raise DivergenceError("non-finite TD error", {"batch": len(records)})
    optimizer_step(optimizer, qf.params, grads)
    return float(np.mean(errors ** 2))


def tbptt_update(net: RecurrentQ, windows: List[List[TransitionRecord]], truncation: int, gamma: float,
                 optimizer) -> RecurrentQ:
    if truncation < 1:
        raise ConfigError(f"truncation {truncation} must be at least 1", key="learn.truncation")
    batch = stack_windows(windows, truncation, net.dtype)
    loss, grads, _ = net.window_gradients(batch, gamma)
    if not np.isfinite(loss):
        raise DivergenceError("non-finite recurrent loss", {"windows": len(windows)})
    optimizer_step(optimizer, net.params, grads)
    return net
