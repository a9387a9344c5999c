"""Hyperparameter grids: expand, run, aggregate the selection metric and pick the best config."""
import csv
import itertools
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from ..core import ConfigError
from .config import ENV_DEFAULTS, ConfigLoadError, ExperimentConfig, read_entries, resolve
from .runner import RunRecord, run_many

logger = logging.getLogger(__name__)

SWEEP_SEED_OFFSET = 1000
FISHING_WINDOW = 100


@dataclass(frozen=True)
class SweepResult:
    config: ExperimentConfig
    mean: float
    stderr: float
    n_seeds: int


@dataclass(frozen=True)
class SweepGrid:
    base: Dict[str, Any]
    axes: Tuple[Tuple[str, Tuple[Any, ...]], ...]

    @property
    def keys(self) -> List[str]:
        return [key for key, _ in self.axes]

    def points(self) -> List[Dict[str, Any]]:
        values = [options for _, options in self.axes]
        return [dict(zip(self.keys, combo)) for combo in itertools.product(*values)]


def parse_grid(source: str, path: Optional[str] = None) -> SweepGrid:
    entries = read_entries(source, path)
    if "grid" not in entries:
        raise ConfigLoadError("Config error", "sweep file needs a 'grid' mapping", None, path, source)
    raw_grid, grid_loc = entries.pop("grid")
    if not isinstance(raw_grid, dict) or not raw_grid:
        raise ConfigLoadError("Config error", "grid: expected a mapping of keys to value lists",
                              grid_loc, path, source)
    axes = []
    for key, options in raw_grid.items():
        if not isinstance(options, list) or not options:
            raise ConfigLoadError("Config error", f"grid.{key}: expected a non-empty list", grid_loc, path, source)
        axes.append((str(key), tuple(options)))
    base = {key: value for key, (value, _) in entries.items()}
    grid = SweepGrid(base, tuple(axes))
    try:
        expand(grid)
    except ConfigError as e:
        loc = entries[e.key][1] if e.key in entries else grid_loc
        message = f"{e.key}: {e.message}" if e.key else e.message
        raise ConfigLoadError("Config error", message, loc, path, source) from None
    return grid


def load_grid(path) -> SweepGrid:
    file_path = Path(path)
    try:
        source = file_path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigLoadError("Config error", f"cannot read sweep grid: {e.strerror}", None, str(path), "") from None
    return parse_grid(source, str(path))


def _sweep_seeds(base: Dict[str, Any]) -> List[int]:
    env = base.get("env")
    count = len(ENV_DEFAULTS[env]["seeds"]) if env in ENV_DEFAULTS else 10
    return [SWEEP_SEED_OFFSET + i for i in range(count)]


def expand(grid: SweepGrid, scale: Optional[str] = None) -> List[ExperimentConfig]:
    configs = []
    for point in grid.points():
        entries = dict(grid.base)
        entries.setdefault("seeds", _sweep_seeds(grid.base))
        entries.update(point)
        configs.append(resolve(entries, scale))
    return configs


def selection_metric(env: str) -> str:
    if env == "lobster":
        return "return"
    if env.startswith("fishing"):
        return "offline_return"
    return "discounted_return"


def seed_score(config: ExperimentConfig, records: Sequence[RunRecord]) -> float:
    if any(r.metric == "failed" for r in records):
        return -math.inf
    metric = selection_metric(config.env)
    values = [r.value for r in sorted(records, key=lambda r: r.step) if r.metric == metric]
    if config.env.startswith("fishing"):
        values = values[-FISHING_WINDOW:]
    if not values:
        return -math.inf
    return math.fsum(values) / len(values)


def aggregate(config: ExperimentConfig, records: Sequence[RunRecord]) -> SweepResult:
    """Mean and standard error over seeds; exact summation keeps it independent of seed order."""
    by_seed: Dict[int, List[RunRecord]] = {}
    for record in records:
        by_seed.setdefault(record.seed, []).append(record)
    scores = [seed_score(config, by_seed.get(seed, [])) for seed in config.seeds]
    n = len(scores)
    if any(math.isinf(s) for s in scores):
        return SweepResult(config, -math.inf, math.inf, n)
    mean = math.fsum(scores) / n
    if n < 2:
        return SweepResult(config, mean, 0.0, n)
    variance = math.fsum((s - mean) ** 2 for s in scores) / (n - 1)
    return SweepResult(config, mean, math.sqrt(variance / n), n)


def select_best(results: Sequence[SweepResult]) -> SweepResult:
    """Highest mean; ties go to the smaller step size, then the smaller truncation length."""
    if not results:
        raise ConfigError("sweep produced no configurations")
    return max(results, key=lambda r: (r.mean, -r.config.alpha, -r.config.truncation))


def write_report(results: Sequence[SweepResult], keys: Sequence[str], path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["config_hash", *keys, "mean", "stderr", "n_seeds"])
        for result in results:
            flat = result.config.to_flat()
            writer.writerow([result.config.config_hash, *(flat.get(k) for k in keys),
                             repr(result.mean), repr(result.stderr), result.n_seeds])


def sweep(grid: SweepGrid, out_dir, scale: Optional[str] = None) -> Tuple[List[SweepResult], SweepResult]:
    configs = expand(grid, scale)
    logger.info("sweeping %d configurations over %d seeds each", len(configs), len(configs[0].seeds))
    runs = run_many(configs, out_dir)
    results = [aggregate(config, run.records) for config, run in zip(configs, runs)]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_report(results, grid.keys, out / "sweep.csv")
    return results, select_best(results)
