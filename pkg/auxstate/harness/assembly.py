from typing import List, Optional

from ..agent_state import (
    AgentStateFunction,
    AuxiliaryInput,
    FrameStackInput,
    LikelihoodInput,
    LobsterTraceInput,
    MapChannels,
    MapTraceInput,
    ParticleFilterInput,
    StateFeaturesInput,
)
from ..core import CompositionMode, ConfigError, RngStream, rng_fork
from ..envs import Environment, make_env
from ..envs.fishing import N_CHANNELS, FishingEnv
from ..envs.lobster import LobsterEnv
from ..envs.rocksample import RockSampleEnv
from ..learn.agents import Agent, PlanningAgent, RecurrentAgent, SarsaAgent
from ..learn.approximators import LinearQ, RecurrentQ, conv_body, conv_q, dtype_for, mlp_q
from ..learn.layers import Relu, Sequential
from ..learn.optim import make_optimizer
from ..learn.replay import ReplayBuffer
from ..oracle import lobster_hitting_times, tabular_mdp, value_iteration
from .config import ExperimentConfig


def build_env(config: ExperimentConfig, root: RngStream) -> Environment:
    return make_env(config.env, config.overrides, rng_fork(root, "layout"))


def _inputs(config: ExperimentConfig, env: Environment, root: RngStream):
    agent = config.agent
    inputs: List[AuxiliaryInput] = []
    mode = CompositionMode.CONCAT_OBS_AUX
    if agent in ("obs-only", "lstm"):
        mode = CompositionMode.OBS_ONLY
    elif agent in ("trace", "trace+lstm"):
        if isinstance(env, FishingEnv):
            inputs.append(MapTraceInput(config.trace_decay, env.layout.size))
        else:
            inputs.append(LobsterTraceInput(config.trace_decay))
    elif agent == "likelihood":
        if not isinstance(env, LobsterEnv):
            raise ConfigError("the likelihood predictor needs the Lobster environment", key="agent")
        inputs.append(LikelihoodInput(config.rate, lobster_hitting_times(env.params)))
    elif agent == "pf":
        form = "rock-marginals" if isinstance(env, RockSampleEnv) else "full"
        inputs.append(ParticleFilterInput(env, config.filter_k, rng_fork(root, "filter"), config.propagation, form))
        mode = CompositionMode.AUX_ONLY
    elif agent == "framestack":
        inputs.append(FrameStackInput(env.observation_dim, config.frames))
    elif agent == "ground-truth":
        inputs.append(StateFeaturesInput(env))
        mode = CompositionMode.AUX_ONLY
    else:
        raise ConfigError(f"unknown agent '{agent}'", key="agent")
    return inputs, mode


def build_state_function(config: ExperimentConfig, env: Environment, root: RngStream) -> AgentStateFunction:
    inputs, mode = _inputs(config, env, root)
    transform: Optional[MapChannels] = None
    if isinstance(env, FishingEnv):
        extra = 1 if inputs else 0
        pool = None if config.approximator in ("cnn", "cnn-lstm") else config.pool
        transform = MapChannels(env.layout.map_size, N_CHANNELS, extra, pool)
    return AgentStateFunction(env.observation_dim, env.n_actions, inputs, mode, transform)


def build_agent(config: ExperimentConfig, env: Environment, root: RngStream) -> Agent:
    if config.approximator == "planner":
        solved = value_iteration(tabular_mdp(env, config.gamma))
        return PlanningAgent(solved.policy, solved.q_values)
    dtype = dtype_for(config.fp)
    init = rng_fork(root, "init")
    rng = rng_fork(root, "agent")
    state_fn = build_state_function(config, env, root)
    optimizer = make_optimizer(config.optimizer, config.alpha)
    n_actions = env.n_actions
    if config.recurrent:
        concat = config.action_concat and config.approximator == "lstm"
        width = state_fn.dim + (n_actions if concat else 0)
        if config.approximator == "cnn-lstm":
            assert isinstance(env, FishingEnv)
            channels = N_CHANNELS + (1 if state_fn.inputs else 0)
            size = env.layout.map_size
            layers, flat = conv_body(size, channels, config.hidden, init, dtype)
            encoder = Sequential(layers + [Relu()], prefix="enc.")
            net = RecurrentQ(width, n_actions, config.hidden, init, dtype, encoder=encoder,
                             encoded_dim=flat, input_shape=(size, size, channels))
        else:
            net = RecurrentQ(width, n_actions, config.hidden, init, dtype)
        return RecurrentAgent(state_fn, net, optimizer, config.epsilon, config.gamma, rng,
                              ReplayBuffer(config.buffer), config.batch, config.truncation, concat,
                              config.updates_per_step, n_actions)
    if config.approximator == "linear":
        qf = LinearQ(state_fn.dim, n_actions, dtype)
    elif config.approximator == "mlp":
        qf = mlp_q(state_fn.dim, n_actions, config.hidden, init, dtype)
    elif config.approximator == "cnn":
        assert isinstance(env, FishingEnv)
        channels = N_CHANNELS + (1 if state_fn.inputs else 0)
        qf = conv_q(env.layout.map_size, channels, n_actions, config.hidden, init, dtype)
    else:
        raise ConfigError(f"approximator '{config.approximator}' cannot drive agent '{config.agent}'",
                          key="learn.approximator")
    replay = ReplayBuffer(config.buffer) if config.replay else None
    return SarsaAgent(state_fn, qf, optimizer, config.epsilon, config.gamma, rng, replay, config.batch,
                      config.updates_per_step)
