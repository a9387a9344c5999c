"""Auxiliary-input agent-state construction for partially observable reinforcement learning."""
from importlib.metadata import PackageNotFoundError, version

from .core import AuxiliaryInputSet, CompositionMode, ConfigError, RngStream, build_agent_state, rng_fork
from .envs import PRESETS, make_env


def _resolve_version() -> str:
    try:
        return version("auxstate")
    except PackageNotFoundError:
        return "0.0.0+local"


__version__ = _resolve_version()

__all__ = [
    "AuxiliaryInputSet",
    "CompositionMode",
    "ConfigError",
    "PRESETS",
    "RngStream",
    "__version__",
    "build_agent_state",
    "make_env",
    "rng_fork",
]
