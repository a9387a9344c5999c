"""Auxiliary-input updaters composed with the observation into the agent state."""
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .auxiliary import (
    FrameStack,
    LikelihoodState,
    TraceState,
    frame_stack_update,
    likelihood_update,
    lobster_trace_update,
    map_trace_update,
)
from .core import AgentStateLayout, AuxiliaryInputSet, CompositionMode, RngStream
from .envs.base import Environment
from .envs.fishing import agent_centric
from .learn.approximators import pool_map
from .particle_filter import ParticleEnsemble, pf_belief, pf_condition, pf_init, pf_step

Arrays = Tuple[np.ndarray, ...]


class AuxiliaryInput:
    dims: Tuple[int, ...] = ()

    def reset(self, obs: np.ndarray, env: Environment) -> Arrays:
        raise NotImplementedError

    def update(self, action: int, obs: np.ndarray, env: Environment) -> Arrays:
        raise NotImplementedError


class LobsterTraceInput(AuxiliaryInput):
    dims = (2,)

    def __init__(self, decay: float):
        self.trace = TraceState.zeros(2, decay)

    def reset(self, obs, env):
        self.trace = lobster_trace_update(TraceState.zeros(2, self.trace.decay), obs)
        return (self.trace.values,)

    def update(self, action, obs, env):
        self.trace = lobster_trace_update(self.trace, obs)
        return (self.trace.values,)


class MapTraceInput(AuxiliaryInput):
    def __init__(self, decay: float, grid_size: int):
        self.grid_size = grid_size
        self.trace = TraceState.zeros((grid_size, grid_size), decay)
        self.dims = ((2 * grid_size - 1) ** 2,)

    def _output(self, env) -> Arrays:
        x, y = env.agent_position()
        return (agent_centric(self.trace.values, x, y).ravel(),)

    def reset(self, obs, env):
        blank = TraceState.zeros((self.grid_size, self.grid_size), self.trace.decay)
        self.trace = map_trace_update(blank, env.last_visibility)
        return self._output(env)

    def update(self, action, obs, env):
        self.trace = map_trace_update(self.trace, env.last_visibility)
        return self._output(env)


class LikelihoodInput(AuxiliaryInput):
    dims = (2,)

    def __init__(self, rate: float, expected_steps: np.ndarray):
        self.start = LikelihoodState.start(rate, expected_steps)
        self.state = self.start

    def reset(self, obs, env):
        self.state, values = likelihood_update(self.start, obs, int(np.argmax(obs[:3])))
        return (values,)

    def update(self, action, obs, env):
        self.state, values = likelihood_update(self.state, obs, int(np.argmax(obs[:3])))
        return (values,)


class ParticleFilterInput(AuxiliaryInput):
    def __init__(self, env: Environment, k: Optional[int], rng: RngStream, propagation: str = "sample",
                 form: str = "full"):
        self.model = env.filter_model()
        self.k = k
        self.rng = rng
        self.propagation = propagation
        self.form = form
        self.depletions = 0
        self.ensemble: Optional[ParticleEnsemble] = None
        context = env.belief_observation(np.zeros(env.observation_dim)).size
        belief_dim = self.model.n_states
        if form == "rock-marginals":
            belief_dim = self.model.belief_features(np.zeros(self.model.n_states)).size
        self.dims = (context, belief_dim) if context else (belief_dim,)

    def _output(self, obs, env) -> Arrays:
        belief = pf_belief(self.ensemble, self.model, self.form)
        context = env.belief_observation(obs)
        return (np.asarray(context, dtype=np.float64), belief) if context.size else (belief,)

    def _track(self, ensemble: ParticleEnsemble) -> None:
        if self.ensemble is not None:
            self.depletions += ensemble.depletions - self.ensemble.depletions
        else:
            self.depletions += ensemble.depletions
        self.ensemble = ensemble

    def reset(self, obs, env):
        self.ensemble = None
        self._track(pf_condition(pf_init(self.model, self.k, self.rng, self.propagation), obs, self.model))
        return self._output(obs, env)

    def update(self, action, obs, env):
        self._track(pf_step(self.ensemble, action, obs, self.model, self.rng))
        return self._output(obs, env)


class FrameStackInput(AuxiliaryInput):
    def __init__(self, obs_dim: int, depth: int):
        self.obs_dim = obs_dim
        self.depth = depth
        self.stack = FrameStack.empty(obs_dim, depth)
        self.previous = np.zeros(obs_dim)
        self.dims = (obs_dim * depth,)

    def reset(self, obs, env):
        self.stack = FrameStack.empty(self.obs_dim, self.depth)
        self.previous = np.asarray(obs, dtype=np.float64)
        return (self.stack.flat(),)

    def update(self, action, obs, env):
        self.stack = frame_stack_update(self.stack, self.previous)
        self.previous = np.asarray(obs, dtype=np.float64)
        return (self.stack.flat(),)


class StateFeaturesInput(AuxiliaryInput):
    def __init__(self, env: Environment):
        self.dims = (env.state_features().size,)

    def reset(self, obs, env):
        return (env.state_features(),)

    def update(self, action, obs, env):
        return (env.state_features(),)


class MapChannels:
    """Reassembles a flat [map, extra maps] agent state into one channels-last tensor, optionally pooled."""

    def __init__(self, map_size: int, channels: int, extra: int = 0, pool: Optional[int] = None):
        self.map_size = map_size
        self.channels = channels
        self.extra = extra
        self.pool = pool
        side = map_size if not pool else -(-map_size // pool)
        self.dim = side * side * (channels + extra)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        cells = self.map_size * self.map_size
        grid = x[: cells * self.channels].reshape(self.map_size, self.map_size, self.channels)
        if self.extra:
            more = x[cells * self.channels: cells * (self.channels + self.extra)]
            grid = np.concatenate([grid, more.reshape(self.extra, self.map_size, self.map_size).transpose(1, 2, 0)],
                                  axis=2)
        if not self.pool:
            return grid.ravel()
        return pool_map(grid, self.map_size, self.channels + self.extra, self.pool)


class AgentStateFunction:
    def __init__(self, obs_dim: int, n_actions: int, inputs: Sequence[AuxiliaryInput], mode,
                 transform=None):
        self.inputs: List[AuxiliaryInput] = list(inputs)
        aux_dims = tuple(d for inp in self.inputs for d in inp.dims)
        self.layout = AgentStateLayout(obs_dim, aux_dims, n_actions, CompositionMode.parse(mode))
        self.transform = transform
        self.previous_action: Optional[int] = None

    @property
    def dim(self) -> int:
        if self.transform is not None:
            return self.transform.dim
        return self.layout.dim

    @property
    def depletions(self) -> int:
        return sum(getattr(inp, "depletions", 0) for inp in self.inputs)

    def _compose(self, obs, aux: List[np.ndarray]) -> np.ndarray:
        x = self.layout.build(obs, self.previous_action, AuxiliaryInputSet(tuple(aux)))
        return self.transform(x) if self.transform is not None else x

    def reset(self, obs, env: Environment) -> np.ndarray:
        self.previous_action = None
        aux = [m for inp in self.inputs for m in inp.reset(obs, env)]
        return self._compose(obs, aux)

    def update(self, action: int, obs, env: Environment) -> np.ndarray:
        aux = [m for inp in self.inputs for m in inp.update(action, obs, env)]
        self.previous_action = action
        return self._compose(obs, aux)
