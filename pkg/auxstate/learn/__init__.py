from .agents import Agent, PlanningAgent, RecurrentAgent, SarsaAgent
from .approximators import LinearQ, RecurrentQ, SequentialQ, mlp_forward_backward
from .loop import EpisodeLog, run_episode
from .optim import AdamState, DivergenceError, adam_step
from .replay import ReplayBuffer
from .sarsa import epsilon_greedy, sarsa_linear_update, tbptt_update

__all__ = [
    "Agent",
    "AdamState",
    "DivergenceError",
    "EpisodeLog",
    "LinearQ",
    "PlanningAgent",
    "RecurrentAgent",
    "RecurrentQ",
    "ReplayBuffer",
    "SarsaAgent",
    "SequentialQ",
    "adam_step",
    "epsilon_greedy",
    "mlp_forward_backward",
    "run_episode",
    "sarsa_linear_update",
    "tbptt_update",
]
