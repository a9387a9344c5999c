from .config import ConfigLoadError, ConfigLoc, ExperimentConfig, describe, load_config, parse_config
from .geometry import export_value_geometry
from .plot import plot
from .runner import RunRecord, read_records, run
from .sweep import SweepResult, load_grid, select_best, sweep

__all__ = [
    "ConfigLoadError",
    "ConfigLoc",
    "ExperimentConfig",
    "RunRecord",
    "SweepResult",
    "describe",
    "export_value_geometry",
    "load_config",
    "load_grid",
    "parse_config",
    "plot",
    "read_records",
    "run",
    "select_best",
    "sweep",
]
