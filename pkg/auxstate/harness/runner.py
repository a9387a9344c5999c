"""Seed fan-out, evaluation protocols and the per-run CSV, config and checkpoint files."""
import csv
import json
import logging
import math
import multiprocessing
import os
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, List, Optional, Sequence

import numpy as np

from ..core import ConfigError, RngStream, rng_fork
from ..envs.base import Environment
from ..learn.agents import Agent
from ..learn.loop import run_episode
from ..learn.optim import DivergenceError
from .assembly import build_agent, build_env
from .config import ExperimentConfig, dump_config

logger = logging.getLogger(__name__)

CSV_HEADER = ("config_hash", "seed", "step", "metric", "value")
MOVING_AVERAGE = 100


@dataclass(frozen=True)
class RunRecord:
    config_hash: str
    seed: int
    step: int
    metric: str
    value: float

    def row(self) -> List[str]:
        return [self.config_hash, str(self.seed), str(self.step), self.metric, repr(float(self.value))]


@dataclass(frozen=True)
class RunResult:
    directory: Path
    records: List[RunRecord]


def run_dir(config: ExperimentConfig, out_dir) -> Path:
    return Path(out_dir) / config.config_hash


class RecordWriter:
    """Appends records to one CSV file, flushing each row."""

    def __init__(self, path: Path):
        self.path = path
        self._fh = open(path, "w", encoding="utf-8", newline="")
        self._writer = csv.writer(self._fh, lineterminator="\n")
        self._writer.writerow(CSV_HEADER)
        self.records: List[RunRecord] = []

    def write(self, record: RunRecord) -> None:
        self._writer.writerow(record.row())
        self._fh.flush()
        self.records.append(record)

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "RecordWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def read_records(path) -> List[RunRecord]:
    records = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_HEADER:
            raise ConfigError(f"{path} is not a run record file (expected header {','.join(CSV_HEADER)})")
        for row in reader:
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise ConfigError(f"{path}: malformed row {row}")
            records.append(RunRecord(row[0], int(row[1]), int(row[2]), row[3], float(row[4])))
    return records


def evaluate_offline(agent: Agent, env: Environment, episodes: int, gamma: float, rng: RngStream) -> float:
    """Mean discounted return of greedy test episodes; the learner itself is left untouched."""
    twin = agent.evaluation_copy(rng)
    returns = [run_episode(env, twin, env.max_episode_steps, rng).discounted_return(gamma)
               for _ in range(episodes)]
    return math.fsum(returns) / len(returns)


class _Session:
    def __init__(self, config: ExperimentConfig, seed: int, writer: RecordWriter):
        self.config = config
        self.seed = seed
        self.writer = writer
        self.root = RngStream(seed, ("run",))
        self.env = build_env(config, self.root)
        self.agent = build_agent(config, self.env, self.root)
        self.env_rng = rng_fork(self.root, "env")
        self.steps = 0
        self.evaluations = 0
        self.eval_env: Optional[Environment] = None

    def emit(self, metric: str, value: float) -> None:
        if not math.isfinite(value):
            raise DivergenceError(f"metric '{metric}' is not finite", {metric: value})
        self.writer.write(RunRecord(self.config.config_hash, self.seed, self.steps, metric, value))

    def _tick(self) -> None:
        self.steps += 1
        if self.config.eval_protocol == "offline" and self.steps % self.config.eval_frequency == 0:
            self._evaluate()

    def _evaluate(self) -> None:
        if self.eval_env is None:
            self.eval_env = build_env(self.config, self.root)
        rng = rng_fork(self.root, f"eval-{self.evaluations}")
        self.evaluations += 1
        value = evaluate_offline(self.agent, self.eval_env, self.config.eval_episodes, self.config.gamma, rng)
        self.emit("offline_return", value)

    def _emit_depletions(self) -> None:
        if self.config.agent == "pf":
            self.emit("depletions", float(self.agent.depletions))

    def run(self) -> None:
        recent: deque = deque(maxlen=MOVING_AVERAGE)
        while self.steps < self.config.steps:
            budget = min(self.env.max_episode_steps, self.config.steps - self.steps)
            log = run_episode(self.env, self.agent, budget, self.env_rng, on_step=self._tick)
            if self.env.continuing:
                if log.length == self.env.max_episode_steps:
                    self.emit("return", log.total_return)
                self._emit_depletions()
                continue
            if self.config.eval_protocol == "online":
                value = log.discounted_return(self.config.gamma)
                recent.append(value)
                self.emit("discounted_return", value)
                self.emit("discounted_return_ma100", math.fsum(recent) / len(recent))
            self.emit("episode_length", float(log.length))
            self.emit("truncated", 1.0 if log.truncated else 0.0)
            self._emit_depletions()

    def checkpoint(self, path: Path) -> None:
        arrays = {f"param/{name}": np.asarray(value) for name, value in self.agent.params.items()}
        config = json.dumps(self.config.to_flat(), sort_keys=True)
        with open(path, "wb") as fh:
            np.savez(fh, config=np.array(config), seed=np.array(self.seed), **arrays)


def run_seed(config: ExperimentConfig, seed: int, out_dir) -> List[RunRecord]:
    directory = run_dir(config, out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    logger.info("seed %d of %s starting (%s, %s)", seed, config.config_hash, config.env, config.agent)
    with RecordWriter(directory / f"seed_{seed}.csv") as writer:
        session = _Session(config, seed, writer)
        try:
            session.run()
        except DivergenceError as e:
            logger.error("seed %d of %s diverged at step %d: %s %s", seed, config.config_hash,
                         session.steps, e.message, e.diagnostics)
            writer.write(RunRecord(config.config_hash, seed, session.steps, "failed", 1.0))
            return writer.records
        session.checkpoint(directory / f"seed_{seed}.npz")
    logger.info("seed %d of %s finished after %d steps", seed, config.config_hash, session.steps)
    return writer.records


def worker_count(runs: int) -> int:
    raw = os.environ.get("AUX_THREADS")
    if raw is None or raw == "":
        limit = os.cpu_count() or 1
    else:
        try:
            limit = int(raw)
        except ValueError:
            raise ConfigError(f"AUX_THREADS must be a positive integer, got '{raw}'") from None
        if limit < 1:
            raise ConfigError(f"AUX_THREADS must be a positive integer, got '{raw}'")
    return max(1, min(limit, runs))


def _run_job(job) -> List[RunRecord]:
    config, seed, out_dir = job
    return run_seed(config, seed, out_dir)


def fan_out(jobs: Sequence[tuple], fn: Callable = _run_job) -> List:
    workers = worker_count(len(jobs))
    if workers == 1:
        return [fn(job) for job in jobs]
    with multiprocessing.Pool(workers) as pool:
        return pool.map(fn, jobs)


def merge_records(paths: Iterable[Path], target: Path) -> None:
    with open(target, "w", encoding="utf-8", newline="") as out:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for path in paths:
            for record in read_records(path):
                writer.writerow(record.row())


def run_many(configs: Sequence[ExperimentConfig], out_dir) -> List[RunResult]:
    """Runs every seed of every config in one pool; each config gets <out>/<config_hash>/."""
    jobs = []
    for config in configs:
        directory = run_dir(config, out_dir)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / "config.yaml").write_text(dump_config(config), encoding="utf-8")
        jobs.extend((config, seed, str(out_dir)) for seed in config.seeds)
    per_job = iter(fan_out(jobs))
    results = []
    for config in configs:
        directory = run_dir(config, out_dir)
        merge_records([directory / f"seed_{seed}.csv" for seed in config.seeds], directory / "records.csv")
        records = [record for _ in config.seeds for record in next(per_job)]
        results.append(RunResult(directory, records))
    return results


def run(config: ExperimentConfig, out_dir) -> RunResult:
    return run_many([config], out_dir)[0]
