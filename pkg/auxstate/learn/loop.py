from dataclasses import dataclass, field
from typing import Callable, List, Optional

from ..core import RngStream
from ..envs.base import Environment
from .agents import Agent


@dataclass
class EpisodeLog:
    rewards: List[float] = field(default_factory=list)
    truncated: bool = False

    @property
    def length(self) -> int:
        return len(self.rewards)

    @property
    def total_return(self) -> float:
        return float(sum(self.rewards))

    def discounted_return(self, gamma: float) -> float:
        total = 0.0
        for reward in reversed(self.rewards):
            total = reward + gamma * total
        return total


def run_episode(
    env: Environment,
    agent: Agent,
    max_steps: int,
    rng: RngStream,
    on_step: Optional[Callable[[], None]] = None,
) -> EpisodeLog:
    """Runs one episode; the agent holds its own exploration rate, discount and step size."""
    log = EpisodeLog()
    obs = env.reset(rng)
    action = agent.begin_episode(obs, env)
    terminal = False
    for _ in range(max_steps):
        result = env.step(action, rng)
        log.rewards.append(result.reward)
        terminal = result.terminal
        action = agent.step(result.reward, result.observation, terminal, env)
        if on_step is not None:
            on_step()
        if terminal:
            break
    log.truncated = not terminal
    return log
