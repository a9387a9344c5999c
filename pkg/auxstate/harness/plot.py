"""Learning-curve charts from run record CSVs: mean over seeds with a standard-error band."""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import yaml  # noqa: E402

from ..core import ConfigError  # noqa: E402
from .runner import RunRecord, read_records  # noqa: E402

logger = logging.getLogger(__name__)

DEFAULT_METRICS = ("return", "discounted_return", "offline_return")


@dataclass(frozen=True)
class Curve:
    label: str
    steps: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    n_seeds: int


def pick_metric(records: Sequence[RunRecord], metric: Optional[str] = None) -> str:
    present = {r.metric for r in records}
    if metric is not None:
        if metric not in present:
            raise ConfigError(f"metric '{metric}' not found (have {', '.join(sorted(present))})", key="metric")
        return metric
    for name in DEFAULT_METRICS:
        if name in present:
            return name
    raise ConfigError("no plottable metric in the inputs", key="metric")


def _label(path: Path, config_hash: str) -> str:
    config = path.parent / "config.yaml"
    if config.is_file():
        data = yaml.safe_load(config.read_text(encoding="utf-8")) or {}
        if isinstance(data, dict) and "agent" in data:
            return f"{data['agent']} ({config_hash})"
    return config_hash


def _series(records: Sequence[RunRecord], metric: str) -> Dict[Tuple[str, int], Tuple[np.ndarray, np.ndarray]]:
    grouped: Dict[Tuple[str, int], List[Tuple[int, float]]] = {}
    for r in records:
        if r.metric == metric:
            grouped.setdefault((r.config_hash, r.seed), []).append((r.step, r.value))
    out = {}
    for key, points in grouped.items():
        points.sort()
        out[key] = (np.array([p[0] for p in points], dtype=np.float64), np.array([p[1] for p in points]))
    return out


def build_curves(paths: Sequence, metric: Optional[str] = None) -> Tuple[str, List[Curve]]:
    if not paths:
        raise ConfigError("plot needs at least one input CSV", key="in")
    loaded = [(Path(p), read_records(p)) for p in paths]
    chosen = pick_metric([r for _, records in loaded for r in records], metric)
    groups: List[Tuple[str, List[Tuple[np.ndarray, np.ndarray]]]] = []
    for path, records in loaded:
        by_seed = _series(records, chosen)
        for config_hash in sorted({h for h, _ in by_seed}):
            seeds = [by_seed[k] for k in sorted(by_seed) if k[0] == config_hash]
            groups.append((_label(path, config_hash), seeds))
    if not groups:
        raise ConfigError(f"no rows for metric '{chosen}'", key="metric")
    grids = [steps for _, seeds in groups for steps, _ in seeds]
    coarsest = min(grids, key=len)
    if any(len(g) != len(coarsest) or not np.array_equal(g, coarsest) for g in grids):
        logger.warning("x-grids differ across curves; resampling to the coarsest grid (%d points)", len(coarsest))
    curves = []
    for label, seeds in groups:
        values = np.stack([np.interp(coarsest, steps, ys) for steps, ys in seeds])
        n = values.shape[0]
        mean = values.mean(axis=0)
        stderr = values.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros_like(mean)
        curves.append(Curve(label, coarsest, mean, stderr, n))
    return chosen, curves


def render(curves: Sequence[Curve], metric: str, out_path) -> Path:
    matplotlib.rcParams["svg.hashsalt"] = "auxstate"
    fig, ax = plt.subplots(figsize=(7, 4.5))
    try:
        for curve in curves:
            ax.plot(curve.steps, curve.mean, label=curve.label, linewidth=1.2)
            ax.fill_between(curve.steps, curve.mean - curve.stderr, curve.mean + curve.stderr, alpha=0.25)
        ax.set_xlabel("environment steps")
        ax.set_ylabel(metric.replace("_", " "))
        ax.legend(loc="best", fontsize="small")
        ax.grid(True, linewidth=0.3)
        out = Path(out_path)
        out.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(out, format="svg", metadata={"Date": None})
    finally:
        plt.close(fig)
    return out


def plot(paths: Sequence, out_path, metric: Optional[str] = None) -> List[Curve]:
    chosen, curves = build_curves(paths, metric)
    render(curves, chosen, out_path)
    return curves
