import hashlib
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

import yaml

from ..core import ConfigError, RngStream
from ..envs import PRESETS, make_env

AGENTS = ("obs-only", "trace", "pf", "likelihood", "lstm", "trace+lstm", "ground-truth", "framestack")
RECURRENT_AGENTS = ("lstm", "trace+lstm")
APPROXIMATORS = ("linear", "mlp", "cnn", "lstm", "cnn-lstm", "planner")
SECTIONS = ("learn", "aux", "filter", "eval")

ENV_AGENTS = {
    "lobster": ("obs-only", "trace", "pf", "likelihood", "lstm", "ground-truth", "framestack"),
    "compass9": ("obs-only", "pf", "lstm", "ground-truth", "framestack"),
    "rocksample_7_8": ("obs-only", "pf", "lstm", "ground-truth", "framestack"),
    "fishing1": ("obs-only", "trace", "lstm", "trace+lstm"),
    "fishing2": ("obs-only", "trace", "lstm", "trace+lstm"),
}

SCALE_STEPS = {
    "desk": {"lobster": 250_000, "compass9": 300_000, "rocksample_7_8": 500_000,
             "fishing1": 200_000, "fishing2": 200_000},
    "paper": {"lobster": 250_000, "compass9": 1_000_000, "rocksample_7_8": 1_500_000,
              "fishing1": 2_000_000, "fishing2": 12_000_000},
}

ENV_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "lobster": {"seeds": list(range(30)), "learn.gamma": 0.9, "learn.alpha": 1e-3, "learn.hidden": 100,
                "learn.replay": False, "filter.k": 100, "eval.protocol": "online", "aux.lambda": 0.9},
    "compass9": {"seeds": list(range(10)), "learn.gamma": 0.9, "learn.alpha": 1e-3, "learn.hidden": 100,
                 "learn.replay": False, "filter.k": "start-states", "eval.protocol": "online"},
    "rocksample_7_8": {"seeds": list(range(10)), "learn.gamma": 0.99, "learn.alpha": 1e-4,
                       "learn.hidden": 100, "learn.buffer": 10_000, "learn.replay": True, "filter.k": 100,
                       "eval.protocol": "online"},
    "fishing1": {"seeds": list(range(5)), "learn.gamma": 0.99, "learn.alpha": 1e-4, "learn.hidden": 64,
                 "learn.buffer": 100_000, "learn.replay": True, "eval.protocol": "offline",
                 "eval.frequency": 2_000, "aux.lambda": 0.95},
    "fishing2": {"seeds": list(range(5)), "learn.gamma": 0.99, "learn.alpha": 1e-4, "learn.hidden": 64,
                 "learn.buffer": 100_000, "learn.replay": True, "eval.protocol": "offline",
                 "eval.frequency": 10_000, "aux.lambda": 0.95},
}

COMMON_DEFAULTS: Dict[str, Any] = {
    "scale": "desk",
    "learn.epsilon": 0.1,
    "learn.optimizer": "adam",
    "learn.buffer": 10_000,
    "learn.batch": 64,
    "learn.truncation": 10,
    "learn.fp": 64,
    "learn.updates_per_step": 1,
    "learn.action_concat": True,
    "learn.pool": 3,
    "aux.lambda": 0.9,
    "aux.rate": 0.1,
    "aux.frames": 3,
    "filter.k": 100,
    "filter.propagation": "sample",
    "eval.frequency": 2_000,
    "eval.episodes": 5,
    "eval.window": 100,
}

# key -> value kind
KEYS: Dict[str, str] = {
    "env": "str", "agent": "str", "seeds": "seeds", "steps": "int", "scale": "str",
    "learn.alpha": "float", "learn.gamma": "float", "learn.epsilon": "float", "learn.approximator": "str",
    "learn.optimizer": "str", "learn.hidden": "int", "learn.buffer": "int", "learn.batch": "int",
    "learn.truncation": "int", "learn.fp": "int", "learn.updates_per_step": "int",
    "learn.action_concat": "bool", "learn.pool": "int", "learn.replay": "bool",
    "aux.lambda": "float", "aux.rate": "float", "aux.frames": "int",
    "filter.k": "k", "filter.propagation": "str",
    "eval.protocol": "str", "eval.frequency": "int", "eval.episodes": "int", "eval.window": "int",
}


@dataclass(frozen=True)
class ConfigLoc:
    line: int
    column: int


@dataclass
class ConfigLoadError(Exception):
    kind: str
    message: str
    loc: Optional[ConfigLoc]
    path: Optional[str]
    source: str

    def __str__(self) -> str:
        if self.loc is None:
            return self.message
        return f"{self.loc.line}:{self.loc.column}: {self.message}"


@dataclass(frozen=True)
class ExperimentConfig:
    env: str
    agent: str
    seeds: Tuple[int, ...]
    steps: int
    scale: str
    alpha: float
    gamma: float
    epsilon: float
    approximator: str
    optimizer: str
    hidden: int
    buffer: int
    batch: int
    truncation: int
    fp: int
    updates_per_step: int
    action_concat: bool
    pool: int
    replay: bool
    trace_decay: float
    rate: float
    frames: int
    filter_k: Optional[int]
    propagation: str
    eval_protocol: str
    eval_frequency: int
    eval_episodes: int
    eval_window: int
    env_overrides: Tuple[Tuple[str, Any], ...] = ()

    @property
    def recurrent(self) -> bool:
        return self.approximator in ("lstm", "cnn-lstm")

    @property
    def overrides(self) -> Dict[str, Any]:
        return dict(self.env_overrides)

    def to_flat(self) -> Dict[str, Any]:
        flat: Dict[str, Any] = {}
        for key, attr in _FIELDS.items():
            value = getattr(self, attr)
            if key == "filter.k" and value is None:
                value = "start-states"
            flat[key] = list(value) if isinstance(value, tuple) else value
        for key, value in self.env_overrides:
            flat[f"env.{key}"] = value
        return flat

    @property
    def config_hash(self) -> str:
        body = {k: v for k, v in self.to_flat().items() if k != "seeds"}
        canonical = json.dumps(body, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]

    def with_values(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)


_FIELDS = {
    "env": "env", "agent": "agent", "seeds": "seeds", "steps": "steps", "scale": "scale",
    "learn.alpha": "alpha", "learn.gamma": "gamma", "learn.epsilon": "epsilon",
    "learn.approximator": "approximator", "learn.optimizer": "optimizer", "learn.hidden": "hidden",
    "learn.buffer": "buffer", "learn.batch": "batch", "learn.truncation": "truncation", "learn.fp": "fp",
    "learn.updates_per_step": "updates_per_step", "learn.action_concat": "action_concat",
    "learn.pool": "pool", "learn.replay": "replay", "aux.lambda": "trace_decay", "aux.rate": "rate",
    "aux.frames": "frames", "filter.k": "filter_k", "filter.propagation": "propagation",
    "eval.protocol": "eval_protocol", "eval.frequency": "eval_frequency",
    "eval.episodes": "eval_episodes", "eval.window": "eval_window",
}


def default_approximator(env: str, agent: str, scale: str) -> str:
    fishing = env.startswith("fishing")
    if agent in RECURRENT_AGENTS:
        return "cnn-lstm" if fishing and scale == "paper" else "lstm"
    if agent == "ground-truth" and env == "lobster":
        return "planner"
    if fishing:
        return "cnn" if scale == "paper" else "mlp"
    return "linear" if env == "lobster" else "mlp"


def _flatten_nodes(node, path: Optional[str], source: str, out: Dict[str, Tuple[Any, ConfigLoc]], top: bool):
    if not isinstance(node, yaml.MappingNode):
        raise ConfigLoadError("Config error", "expected a mapping of keys to values",
                              _loc(node), path, source)
    for key_node, value_node in node.value:
        key = key_node.value
        if not isinstance(key_node, yaml.ScalarNode) or not isinstance(key, str):
            raise ConfigLoadError("Config error", "config keys must be strings", _loc(key_node), path, source)
        if top and key in SECTIONS and isinstance(value_node, yaml.MappingNode):
            nested: Dict[str, Tuple[Any, ConfigLoc]] = {}
            _flatten_nodes(value_node, path, source, nested, top=False)
            for sub, entry in nested.items():
                _store(out, f"{key}.{sub}", entry, key_node, path, source)
            continue
        try:
            value = yaml.safe_load(yaml.serialize(value_node))
        except yaml.YAMLError as e:
            problem = getattr(e, "problem", None) or str(e)
            raise ConfigLoadError("YAML error", problem, _loc(value_node), path, source) from None
        _store(out, key, (value, _loc(value_node)), key_node, path, source)


def _store(out, key, entry, key_node, path, source):
    if key in out:
        raise ConfigLoadError("Config error", f"duplicate key '{key}'", _loc(key_node), path, source)
    out[key] = entry


def _loc(node) -> Optional[ConfigLoc]:
    mark = getattr(node, "start_mark", None)
    if mark is None:
        return None
    return ConfigLoc(mark.line + 1, mark.column + 1)


def read_entries(source: str, path: Optional[str] = None) -> Dict[str, Tuple[Any, ConfigLoc]]:
    """Parses YAML into flat dotted keys, each with the position of its value."""
    try:
        root = yaml.compose(source, Loader=yaml.SafeLoader)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        loc = ConfigLoc(mark.line + 1, mark.column + 1) if mark is not None else None
        problem = getattr(e, "problem", None) or str(e)
        raise ConfigLoadError("YAML error", problem, loc, path, source) from None
    if root is None:
        raise ConfigLoadError("Config error", "config is empty", None, path, source)
    entries: Dict[str, Tuple[Any, ConfigLoc]] = {}
    _flatten_nodes(root, path, source, entries, top=True)
    return entries


def _coerce(key: str, kind: str, value: Any):
    if kind == "str":
        if not isinstance(value, str):
            raise ConfigError("expected a string")
        return value
    if kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError("expected true or false")
        return value
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError("expected an integer")
        return value
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError("expected a number")
        return float(value)
    if kind == "k":
        if value == "start-states":
            return None
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError("expected a particle count or 'start-states'")
        return value
    if kind == "seeds":
        if isinstance(value, int) and not isinstance(value, bool):
            return tuple(range(value))
        if not isinstance(value, list) or not all(isinstance(s, int) and not isinstance(s, bool) for s in value):
            raise ConfigError("expected a list of integer seeds or a seed count")
        return tuple(value)
    raise ConfigError(f"unsupported key kind {kind}")


def _check_ranges(values: Dict[str, Any]) -> None:
    def need(key, ok, message):
        if not ok:
            raise ConfigError(message, key=key)

    need("learn.alpha", values["learn.alpha"] > 0, "step size must be positive")
    need("learn.gamma", 0.0 <= values["learn.gamma"] < 1.0, "discount must lie in [0, 1)")
    need("learn.epsilon", 0.0 <= values["learn.epsilon"] <= 1.0, "exploration rate must lie in [0, 1]")
    need("learn.optimizer", values["learn.optimizer"] in ("adam", "sgd"), "expected 'adam' or 'sgd'")
    need("learn.fp", values["learn.fp"] in (32, 64), "expected 32 or 64")
    for key in ("learn.hidden", "learn.buffer", "learn.batch", "learn.updates_per_step", "learn.pool",
                "aux.frames", "eval.frequency", "eval.episodes", "eval.window", "steps"):
        need(key, values[key] >= 1, "must be at least 1")
    need("learn.truncation", values["learn.truncation"] >= 1, "must be at least 1")
    need("aux.lambda", 0.0 <= values["aux.lambda"] <= 1.0, "decay must lie in [0, 1]")
    need("aux.rate", values["aux.rate"] > 0, "rate must be positive")
    k = values["filter.k"]
    need("filter.k", k is None or k >= 1, "particle count must be at least 1")
    need("filter.propagation", values["filter.propagation"] in ("sample", "exhaustive"),
         "expected 'sample' or 'exhaustive'")
    need("eval.protocol", values["eval.protocol"] in ("online", "offline"), "expected 'online' or 'offline'")
    need("seeds", len(values["seeds"]) >= 1, "at least one seed is required")
    need("seeds", all(0 <= s < 2**64 for s in values["seeds"]), "seeds must be 64-bit unsigned integers")
    need("scale", values["scale"] in SCALE_STEPS, "expected 'desk' or 'paper'")


def _check_matrix(values: Dict[str, Any]) -> None:
    env, agent = values["env"], values["agent"]
    if agent not in AGENTS:
        raise ConfigError(f"unknown agent '{agent}' (expected one of {', '.join(AGENTS)})", key="agent")
    if agent not in ENV_AGENTS[env]:
        raise ConfigError(f"agent '{agent}' is not available for environment '{env}'", key="agent")
    approximator = values["learn.approximator"]
    if approximator not in APPROXIMATORS:
        raise ConfigError(f"unknown approximator '{approximator}'", key="learn.approximator")
    recurrent = approximator in ("lstm", "cnn-lstm")
    if recurrent != (agent in RECURRENT_AGENTS):
        raise ConfigError(f"approximator '{approximator}' does not fit agent '{agent}'", key="learn.approximator")
    if approximator in ("cnn", "cnn-lstm") and not env.startswith("fishing"):
        raise ConfigError("convolutional approximators need a Fishing map", key="learn.approximator")
    if approximator == "planner" and not (env == "lobster" and agent == "ground-truth"):
        raise ConfigError("the planner only drives the Lobster ground-truth agent", key="learn.approximator")
    if env == "lobster" and agent == "ground-truth" and approximator != "planner":
        raise ConfigError("the Lobster ground-truth agent plans with value iteration", key="learn.approximator")
    if values["filter.propagation"] == "exhaustive" and env == "rocksample_7_8":
        raise ConfigError("exhaustive propagation is not available for RockSample", key="filter.propagation")


def resolve(entries: Mapping[str, Any], scale: Optional[str] = None) -> ExperimentConfig:
    """Fills defaults and validates; raises ConfigError naming the offending key."""
    raw = dict(entries)
    for key in ("env", "agent"):
        if key not in raw:
            raise ConfigError("missing required key", key=key)
    overrides = []
    for key in sorted(k for k in raw if k.startswith("env.")):
        overrides.append((key[4:], raw.pop(key)))
    for key in raw:
        if key not in KEYS:
            raise ConfigError("unknown key", key=key)
    env = _coerce("env", "str", raw["env"])
    if env not in PRESETS:
        raise ConfigError(f"unknown environment '{env}' (expected one of {', '.join(PRESETS)})", key="env")
    values: Dict[str, Any] = dict(COMMON_DEFAULTS)
    values.update(ENV_DEFAULTS[env])
    if scale is not None:
        raw["scale"] = scale
    for key, value in raw.items():
        try:
            values[key] = _coerce(key, KEYS[key], value)
        except ConfigError as e:
            raise ConfigError(e.message, key=key) from None
    if not isinstance(values["seeds"], tuple):
        values["seeds"] = _coerce("seeds", "seeds", values["seeds"])
    if values["filter.k"] == "start-states":
        values["filter.k"] = None
    if values["scale"] not in SCALE_STEPS:
        raise ConfigError("expected 'desk' or 'paper'", key="scale")
    values.setdefault("steps", SCALE_STEPS[values["scale"]][env])
    values.setdefault("learn.approximator", default_approximator(env, values["agent"], values["scale"]))
    if values["learn.approximator"] in ("lstm", "cnn-lstm"):
        values["learn.replay"] = True
    _check_ranges(values)
    _check_matrix(values)
    fields = {attr: values[key] for key, attr in _FIELDS.items()}
    return ExperimentConfig(env_overrides=tuple(overrides), **fields)


def parse_config(source: str, path: Optional[str] = None, scale: Optional[str] = None) -> ExperimentConfig:
    entries = read_entries(source, path)
    try:
        config = resolve({k: v for k, (v, _) in entries.items()}, scale)
        _check_env(config)
        return config
    except ConfigError as e:
        loc = entries[e.key][1] if e.key in entries else None
        if loc is None and e.key and e.key.startswith("env."):
            loc = next((entries[k][1] for k in entries if k.startswith(e.key)), None)
        message = f"{e.key}: {e.message}" if e.key else e.message
        raise ConfigLoadError("Config error", message, loc, path, source) from None


def _check_env(config: ExperimentConfig) -> None:
    make_env(config.env, config.overrides, RngStream(0, ("check",)))


def load_config(path, scale: Optional[str] = None) -> ExperimentConfig:
    file_path = Path(path)
    try:
        source = file_path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigLoadError("Config error", f"cannot read config: {e.strerror}", None, str(path), "") from None
    return parse_config(source, str(path), scale)


def dump_config(config: ExperimentConfig) -> str:
    return yaml.safe_dump(config.to_flat(), sort_keys=True, default_flow_style=None)


def describe(config: ExperimentConfig) -> List[str]:
    lines = [f"config_hash: {config.config_hash}"]
    for key, value in sorted(config.to_flat().items()):
        lines.append(f"{key}: {value}")
    return lines