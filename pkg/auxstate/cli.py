import argparse
import logging
import sys
from typing import Callable, List

from .core import ConfigError, RngStream
from .diagnostics import from_load_error, quantity_notes, render_diagnostic
from .envs import PRESETS, dump_presets, make_env
from .envs.base import UnsupportedOperation
from .harness.config import ENV_DEFAULTS, SCALE_STEPS, ConfigLoadError, describe, load_config
from .harness.geometry import export_value_geometry
from .harness.plot import plot
from .harness.runner import run
from .harness.sweep import load_grid, sweep
from .learn.optim import DivergenceError
from .oracle import dump_mdp, greedy_state_policy, mc_evaluate, tabular_mdp, value_iteration

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(verbosity: int = 0) -> None:
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity >= 2:
        level = logging.DEBUG
    root = logging.getLogger("auxstate")
    for handler in list(root.handlers):
        root.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    root.setLevel(level)


def _guarded(body: Callable[[], int]) -> int:
    try:
        return body()
    except ConfigLoadError as e:
        print(from_load_error(e).render())
        return 1
    except ConfigError as e:
        print(render_diagnostic("Config error", str(e)))
        return 1
    except UnsupportedOperation as e:
        print(render_diagnostic("Unsupported", e.message))
        return 1
    except DivergenceError as e:
        print(render_diagnostic("Divergence", e.message, notes=quantity_notes(e.diagnostics)))
        return 1
    except OSError as e:
        print(render_diagnostic("I/O error", f"{e.strerror or e}", path=e.filename))
        return 1


def _parse(parser: argparse.ArgumentParser, argv: List[str]) -> argparse.Namespace:
    try:
        return parser.parse_args(argv)
    except SystemExit as e:
        raise _Exit(int(e.code or 0)) from None


class _Exit(Exception):
    def __init__(self, code: int):
        super().__init__(code)
        self.code = code


def _command(fn: Callable[[List[str]], int]) -> Callable[[List[str]], int]:
    def wrapper(argv: List[str]) -> int:
        try:
            return fn(argv)
        except _Exit as e:
            return e.code

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _scale_option(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--scale", choices=sorted(SCALE_STEPS), default=None,
                        help="step-budget profile for keys the config leaves unset")


@_command
def run_command(argv: List[str]) -> int:
    parser = argparse.ArgumentParser(prog="auxstate run", description="Run every seed of one config.")
    parser.add_argument("--config", required=True)
    parser.add_argument("--out", required=True)
    _scale_option(parser)
    args = _parse(parser, argv)

    def body() -> int:
        config = load_config(args.config, args.scale)
        result = run(config, args.out)
        failed = sorted({r.seed for r in result.records if r.metric == "failed"})
        print(f"{config.config_hash} {len(config.seeds)} seeds -> {result.directory}")
        if failed:
            print(f"failed seeds: {', '.join(str(s) for s in failed)}")
            return 1
        return 0

    return _guarded(body)


@_command
def check_command(argv: List[str]) -> int:
    parser = argparse.ArgumentParser(prog="auxstate check", description="Validate a config without running it.")
    parser.add_argument("config")
    _scale_option(parser)
    args = _parse(parser, argv)

    def body() -> int:
        for line in describe(load_config(args.config, args.scale)):
            print(line)
        return 0

    return _guarded(body)


@_command
def sweep_command(argv: List[str]) -> int:
    parser = argparse.ArgumentParser(prog="auxstate sweep", description="Run a hyperparameter grid.")
    parser.add_argument("--grid", required=True)
    parser.add_argument("--out", default="sweeps")
    _scale_option(parser)
    args = _parse(parser, argv)

    def body() -> int:
        results, best = sweep(load_grid(args.grid), args.out, args.scale)
        print(f"{len(results)} configurations; selected {best.config.config_hash} "
              f"mean {best.mean!r} stderr {best.stderr!r} over {best.n_seeds} seeds")
        for line in describe(best.config):
            print(line)
        return 0

    return _guarded(body)


@_command
def plot_command(argv: List[str]) -> int:
    parser = argparse.ArgumentParser(prog="auxstate plot", description="Chart run records as SVG.")
    parser.add_argument("--in", dest="inputs", nargs="+", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--metric", default=None)
    args = _parse(parser, argv)

    def body() -> int:
        curves = plot(args.inputs, args.out, args.metric)
        print(f"{len(curves)} curves -> {args.out}")
        return 0

    return _guarded(body)


@_command
def oracle_command(argv: List[str]) -> int:
    parser = argparse.ArgumentParser(prog="auxstate oracle", description="Fully observable reference tools.")
    sub = parser.add_subparsers(dest="tool", required=True)
    dump = sub.add_parser("dump-mdp", help="write the enumerated transition and reward tensors")
    dump.add_argument("env", choices=PRESETS)
    dump.add_argument("--out", default=None)
    dump.add_argument("--gamma", type=float, default=None)
    baseline = sub.add_parser("lobster-baseline", help="Monte-Carlo return of the planning policy on Lobster")
    baseline.add_argument("--runs", type=int, default=1000)
    baseline.add_argument("--seed", type=int, default=0)
    args = _parse(parser, argv)

    def body() -> int:
        if args.tool == "dump-mdp":
            gamma = args.gamma if args.gamma is not None else ENV_DEFAULTS[args.env]["learn.gamma"]
            env = make_env(args.env, rng=RngStream(0, ("layout",)))
            path = dump_mdp(env, gamma, args.out or f"{args.env}_mdp.npz")
            print(path)
            return 0
        env = make_env("lobster")
        solved = value_iteration(tabular_mdp(env, ENV_DEFAULTS["lobster"]["learn.gamma"]))
        estimate = mc_evaluate(env, greedy_state_policy(solved), args.runs, env.max_episode_steps,
                               RngStream(args.seed, ("baseline",)))
        print(f"mean {estimate.mean!r} stderr {estimate.stderr!r} over {args.runs} segments")
        return 0

    return _guarded(body)


@_command
def geometry_command(argv: List[str]) -> int:
    parser = argparse.ArgumentParser(prog="auxstate geometry",
                                     description="Export normalised action values of a linear Lobster agent.")
    parser.add_argument("--agent", required=True)
    parser.add_argument("--obs-only", dest="obs_only", default=None)
    parser.add_argument("--out", required=True)
    args = _parse(parser, argv)

    def body() -> int:
        points = export_value_geometry(args.agent, args.out, args.obs_only)
        print(f"{len(points)} points -> {args.out}")
        return 0

    return _guarded(body)


@_command
def presets_command(argv: List[str]) -> int:
    parser = argparse.ArgumentParser(prog="auxstate presets", description="List or dump the embedded layouts.")
    parser.add_argument("--dump", default=None)
    args = _parse(parser, argv)

    def body() -> int:
        if args.dump is None:
            for name in PRESETS:
                print(name)
            return 0
        for path in dump_presets(args.dump):
            print(path)
        return 0

    return _guarded(body)


COMMANDS = {
    "run": run_command,
    "check": check_command,
    "sweep": sweep_command,
    "plot": plot_command,
    "oracle": oracle_command,
    "geometry": geometry_command,
    "presets": presets_command,
}
