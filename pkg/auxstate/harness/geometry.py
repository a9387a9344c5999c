"""Value-geometry export: normalised left/right action values of a linear Lobster agent at L0."""
import csv
import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..auxiliary import LikelihoodState
from ..core import ConfigError, RngStream
from ..envs.base import UnsupportedOperation
from ..envs.lobster import LEFT, RIGHT, LobsterEnv, LobsterState, lobster_observation
from ..learn.agents import SarsaAgent
from ..learn.loop import run_episode
from ..oracle import lobster_hitting_times, tabular_mdp, value_iteration
from .assembly import build_agent, build_env
from .config import ExperimentConfig, resolve

GEOMETRY_HEADER = ("series", "feature_1", "feature_2", "q_left", "q_right")
TRACE_DEPTH = 40
LIKELIHOOD_DEPTH = 40
PF_ROLLOUTS = 20
PF_ROLLOUT_STEPS = 200


@dataclass(frozen=True)
class GeometryPoint:
    series: str
    feature_1: float
    feature_2: float
    q_left: float
    q_right: float


@dataclass(frozen=True)
class Checkpoint:
    config: ExperimentConfig
    seed: int
    params: Dict[str, np.ndarray]


def load_checkpoint(path) -> Checkpoint:
    try:
        with np.load(Path(path), allow_pickle=False) as data:
            flat = json.loads(str(data["config"]))
            seed = int(data["seed"])
            params = {name[len("param/"):]: np.array(data[name]) for name in data.files
                      if name.startswith("param/")}
    except (OSError, KeyError, ValueError) as e:
        raise ConfigError(f"cannot read checkpoint {path}: {e}") from None
    return Checkpoint(resolve(flat), seed, params)


def _l0_observation() -> np.ndarray:
    return lobster_observation(LobsterState(0, False, False))


def _theta(checkpoint: Checkpoint) -> np.ndarray:
    config = checkpoint.config
    if config.env != "lobster":
        raise UnsupportedOperation(f"value geometry is defined for Lobster, not '{config.env}'")
    if config.approximator != "linear" or "theta" not in checkpoint.params:
        raise UnsupportedOperation(f"value geometry needs a linear agent, got '{config.approximator}'")
    return checkpoint.params["theta"].astype(np.float64)


def _lobster(checkpoint: Checkpoint) -> LobsterEnv:
    env = build_env(checkpoint.config, RngStream(checkpoint.seed, ("run",)))
    if not isinstance(env, LobsterEnv):
        raise UnsupportedOperation(f"value geometry is defined for Lobster, not '{checkpoint.config.env}'")
    return env


def _point(series: str, features: Tuple[float, float], theta: np.ndarray, x: np.ndarray) -> GeometryPoint:
    q = theta @ x
    return GeometryPoint(series, float(features[0]), float(features[1]), float(q[LEFT]), float(q[RIGHT]))


def trace_points(checkpoint: Checkpoint) -> List[GeometryPoint]:
    """Every reachable pair of trace values, exported as complements so 1 means long unseen."""
    theta = _theta(checkpoint)
    decay = checkpoint.config.trace_decay
    levels = sorted({0.0} | {decay ** k for k in range(TRACE_DEPTH + 1)})
    obs = _l0_observation()
    return [_point("trace", (1.0 - m1, 1.0 - m2), theta, np.concatenate([obs, [m1, m2]]))
            for m1, m2 in itertools.product(levels, levels)]


def likelihood_points(checkpoint: Checkpoint) -> List[GeometryPoint]:
    theta = _theta(checkpoint)
    config = checkpoint.config
    table = lobster_hitting_times(_lobster(checkpoint).params)
    start = LikelihoodState.start(config.rate, table)
    counters = [float(n) for n in range(LIKELIHOOD_DEPTH + 1)] + [math.inf]
    obs = _l0_observation()
    points = []
    for c1, c2 in itertools.product(counters, counters):
        values = LikelihoodState((c1, c2), start.rate, start.expected_steps).values(0)
        points.append(_point("likelihood", (values[0], values[1]), theta, np.concatenate([obs, values])))
    return points


def _presence_marginals(belief: np.ndarray) -> Tuple[float, float]:
    index = np.arange(belief.size)
    return float(belief[(index // 2) % 2 == 1].sum()), float(belief[index % 2 == 1].sum())


def pf_points(checkpoint: Checkpoint) -> List[GeometryPoint]:
    """Belief features met at L0 during greedy rollouts of the trained filter agent."""
    theta = _theta(checkpoint)
    config = checkpoint.config
    root = RngStream(checkpoint.seed, ("geometry",))
    env = build_env(config, root)
    agent = build_agent(config, env, root)
    if not isinstance(agent, SarsaAgent) or not isinstance(env, LobsterEnv):
        raise UnsupportedOperation("value geometry needs a linear Lobster agent")
    agent.qf.params["theta"][...] = theta
    greedy = agent.evaluation_copy(RngStream(checkpoint.seed, ("geometry", "act")))
    seen: Dict[Tuple[float, float], GeometryPoint] = {}

    def collect() -> None:
        if env.state.location != 0 or greedy.x is None:
            return
        features = _presence_marginals(np.asarray(greedy.x))
        seen.setdefault(features, _point("pf", features, theta, np.asarray(greedy.x)))

    rng = RngStream(checkpoint.seed, ("geometry", "env"))
    for _ in range(PF_ROLLOUTS):
        run_episode(env, greedy, PF_ROLLOUT_STEPS, rng, on_step=collect)
    return [seen[key] for key in sorted(seen)]


def obs_only_points(checkpoint: Checkpoint) -> List[GeometryPoint]:
    return [_point("obs-only", (0.0, 0.0), _theta(checkpoint), _l0_observation())]


def ground_truth_points(gamma: float, env: Optional[LobsterEnv] = None) -> List[GeometryPoint]:
    """Value-iteration action values at the four true states of L0."""
    env = env or LobsterEnv()
    solved = value_iteration(tabular_mdp(env, gamma))
    points = []
    for r1, r2 in itertools.product((False, True), (False, True)):
        q = solved.q_values[LobsterState(0, r1, r2).index]
        points.append(GeometryPoint("ground-truth", float(r1), float(r2), float(q[LEFT]), float(q[RIGHT])))
    return points


def agent_points(checkpoint: Checkpoint) -> List[GeometryPoint]:
    agent = checkpoint.config.agent
    if agent == "trace":
        return trace_points(checkpoint)
    if agent == "likelihood":
        return likelihood_points(checkpoint)
    if agent == "pf":
        return pf_points(checkpoint)
    if agent == "obs-only":
        return obs_only_points(checkpoint)
    raise UnsupportedOperation(f"no value geometry for agent '{agent}'")


def normalize(points: Sequence[GeometryPoint]) -> List[GeometryPoint]:
    """Min-max scales q_left and q_right jointly within each series; a flat series maps to 0.5."""
    out = []
    series = sorted({p.series for p in points}, key=[p.series for p in points].index)
    for name in series:
        group = [p for p in points if p.series == name]
        values = [v for p in group for v in (p.q_left, p.q_right)]
        low, high = min(values), max(values)
        span = high - low

        def scale(v: float) -> float:
            return 0.5 if span == 0 else (v - low) / span

        out.extend(GeometryPoint(p.series, p.feature_1, p.feature_2, scale(p.q_left), scale(p.q_right))
                   for p in group)
    return out


def export_value_geometry(agent_ckpt, out_path, obs_only_ckpt=None) -> List[GeometryPoint]:
    checkpoint = load_checkpoint(agent_ckpt)
    points = agent_points(checkpoint)
    if obs_only_ckpt is not None:
        points += obs_only_points(load_checkpoint(obs_only_ckpt))
    points += ground_truth_points(checkpoint.config.gamma, _lobster(checkpoint))
    points = normalize(points)
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(GEOMETRY_HEADER)
        for p in points:
            writer.writerow([p.series, repr(p.feature_1), repr(p.feature_2), repr(p.q_left), repr(p.q_right)])
    return points
