import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .core import ConfigError, RngStream
from .envs.base import FilterModel

logger = logging.getLogger(__name__)

SAMPLE = "sample"
EXHAUSTIVE = "exhaustive"


@dataclass(frozen=True)
class ParticleEnsemble:
    states: np.ndarray
    weights: np.ndarray
    propagation: str = SAMPLE
    depletions: int = 0

    @property
    def k(self) -> int:
        return len(self.states)


def pf_init(
    model: FilterModel, k: Optional[int], rng: RngStream, propagation: str = SAMPLE
) -> ParticleEnsemble:
    """k=None places one particle on every state in the start distribution's support."""
    start = model.start_distribution()
    if propagation == EXHAUSTIVE:
        return ParticleEnsemble(np.arange(model.n_states), start.copy(), EXHAUSTIVE)
    if propagation != SAMPLE:
        raise ConfigError(f"unknown propagation mode '{propagation}'", key="filter.propagation")
    if k is None:
        states = np.flatnonzero(start > 0)
    else:
        if k < 1:
            raise ConfigError(f"particle count {k} must be at least 1", key="filter.k")
        states = rng.choice(model.n_states, size=k, p=start)
    k_actual = len(states)
    return ParticleEnsemble(np.asarray(states, dtype=np.int64), np.full(k_actual, 1.0 / k_actual))


def pf_step(pe: ParticleEnsemble, action: int, obs, model: FilterModel, rng: RngStream) -> ParticleEnsemble:
    obs = np.asarray(obs)
    if pe.propagation == EXHAUSTIVE:
        prior = model.transition_matrix(action, obs).T @ pe.weights
        states = pe.states
    else:
        states, factors = model.propagate(pe.states, action, obs, rng)
        prior = pe.weights * factors
    unnormalised = model.emission(obs, states, action) * prior
    total = unnormalised.sum()
    depletions = pe.depletions
    if total <= 0.0:
        depletions += 1
        logger.debug("particle depletion #%d; weights reset to uniform", depletions)
        weights = np.full(len(states), 1.0 / len(states))
    else:
        weights = unnormalised / total
    return replace(pe, states=states, weights=weights, depletions=depletions)


def pf_condition(pe: ParticleEnsemble, obs, model: FilterModel) -> ParticleEnsemble:
    """Reweights by the first observation of an episode, before any action."""
    unnormalised = model.emission(np.asarray(obs), pe.states, -1) * pe.weights
    total = unnormalised.sum()
    if total <= 0.0:
        return replace(pe, weights=np.full(pe.k, 1.0 / pe.k), depletions=pe.depletions + 1)
    return replace(pe, weights=unnormalised / total)


def pf_belief(pe: ParticleEnsemble, model: FilterModel, form: str = "full") -> np.ndarray:
    belief = np.bincount(pe.states, weights=pe.weights, minlength=model.n_states)
    if form == "full":
        return belief
    if form == "rock-marginals":
        return model.belief_features(belief)
    raise ConfigError(f"unknown belief form '{form}'")
