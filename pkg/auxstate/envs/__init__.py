from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

import yaml

from ..core import ConfigError, RngStream
from .base import Environment, FilterModel, StepResult, UnsupportedOperation, enumerate_states
from .compass import CompassEnv, CompassParams
from .fishing import DIRECTIONS, Current, FishingEnv, FishingLayout, RewardSpot
from .lobster import LobsterEnv, LobsterParams
from .rocksample import RockSampleEnv, RockSampleLayout

PRESETS = ("lobster", "compass9", "rocksample_7_8", "fishing1", "fishing2")

__all__ = [
    "PRESETS",
    "Environment",
    "FilterModel",
    "StepResult",
    "UnsupportedOperation",
    "enumerate_states",
    "preset_text",
    "load_layout",
    "make_env",
    "dump_presets",
]


def preset_text(name: str) -> str:
    if name not in PRESETS:
        raise ConfigError(f"Unknown environment preset '{name}' (expected one of {', '.join(PRESETS)})",
                          key="env")
    return resources.files(__package__).joinpath("presets", f"{name}.yaml").read_text(encoding="utf-8")


def load_layout(name: str, overrides: Optional[Mapping[str, Any]] = None) -> Dict[str, Any]:
    layout = yaml.safe_load(preset_text(name))
    for key, value in (overrides or {}).items():
        if key not in layout or key == "env":
            raise ConfigError(f"preset '{name}' has no field '{key}'", key=f"env.{key}")
        layout[key] = value
    return layout


def _cell(value, key: str):
    try:
        x, y = value
        return int(x), int(y)
    except (TypeError, ValueError):
        raise ConfigError(f"expected an [x, y] pair, got {value!r}", key=key) from None


def _direction(name, key: str) -> int:
    if name not in DIRECTIONS:
        raise ConfigError(f"unknown current direction {name!r}", key=key)
    return DIRECTIONS.index(name)


def _fishing_layout(name: str, layout: Dict[str, Any]) -> FishingLayout:
    rewards = tuple(
        RewardSpot(_cell(r["cell"], "env.rewards"), float(r["rate"])) for r in layout.get("rewards") or ()
    )
    currents = tuple(
        Current(
            cell=_cell(c["cell"], "env.currents"),
            directions=tuple(_direction(d, "env.currents") for d in c["directions"]),
            initial=_direction(c["initial"], "env.currents"),
            rate=float(c["rate"]),
        )
        for c in layout.get("currents") or ()
    )
    return FishingLayout(
        size=int(layout["size"]),
        start=_cell(layout["start"], "env.start"),
        slip=float(layout["slip"]),
        window=int(layout["window"]),
        max_episode_steps=int(layout["max_episode_steps"]),
        walls=frozenset(_cell(c, "env.walls") for c in layout.get("walls") or ()),
        glass=frozenset(_cell(c, "env.glass") for c in layout.get("glass") or ()),
        rewards=rewards,
        currents=currents,
        name=name,
    )


def make_env(
    preset: str, overrides: Optional[Mapping[str, Any]] = None, rng: Optional[RngStream] = None
) -> Environment:
    layout = load_layout(preset, overrides)
    kind = layout.pop("env")
    try:
        if kind == "lobster":
            return LobsterEnv(LobsterParams(
                move_success=float(layout["move_success"]),
                regen_mean=float(layout["regen_mean"]),
                max_episode_steps=int(layout["max_episode_steps"]),
            ))
        if kind == "compass":
            return CompassEnv(CompassParams(
                size=int(layout["size"]),
                goal_row=int(layout["goal_row"]),
                max_episode_steps=int(layout["max_episode_steps"]),
                wall_colors=tuple(layout["wall_colors"]),
                goal_color=layout["goal_color"],
            ))
        if kind == "rocksample":
            positions = layout["rock_positions"]
            rocks = RockSampleLayout(
                size=int(layout["size"]),
                n_rocks=int(layout["n_rocks"]),
                rock_positions=None if positions is None else tuple(
                    _cell(p, "env.rock_positions") for p in positions
                ),
                start=_cell(layout["start"], "env.start"),
                half_efficiency_distance=float(layout["half_efficiency_distance"]),
                exit_reward=float(layout["exit_reward"]),
                good_reward=float(layout["good_reward"]),
                bad_reward=float(layout["bad_reward"]),
                max_episode_steps=int(layout["max_episode_steps"]),
            )
            if rocks.half_efficiency_distance <= 0:
                raise ConfigError("must be positive", key="env.half_efficiency_distance")
            return RockSampleEnv(rocks, rng or RngStream(0, ("layout",)))
        if kind == "fishing":
            return FishingEnv(_fishing_layout(preset, layout))
    except (TypeError, ValueError, KeyError) as e:
        raise ConfigError(f"malformed preset '{preset}': {e}", key="env") from None
    raise ConfigError(f"preset '{preset}' names unknown environment kind '{kind}'", key="env")


def dump_presets(directory) -> List[Path]:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name in PRESETS:
        path = out / f"{name}.yaml"
        path.write_text(preset_text(name), encoding="utf-8")
        written.append(path)
    return written
