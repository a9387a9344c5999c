import sys

from . import __version__
from . import cli as auxstate_cli

HELP_TEXT = """Usage:
  auxstate run --config <file> [--scale desk|paper] --out <dir>
  auxstate check <config> [--scale desk|paper]
  auxstate sweep --grid <file> [--out <dir>] [--scale desk|paper]
  auxstate plot --in <csv...> --out <svg> [--metric <name>]
  auxstate oracle dump-mdp <env> [--out <file.npz>] [--gamma <g>]
  auxstate oracle lobster-baseline [--runs <n>] [--seed <s>]
  auxstate geometry --agent <ckpt> [--obs-only <ckpt>] --out <csv>
  auxstate presets [--dump <dir>]
  auxstate --version
  auxstate --help

Options:
  -v, -vv  Log progress (INFO) or filter internals (DEBUG) to stderr.

Environment:
  AUX_THREADS  Upper bound on worker processes for seed fan-out.
"""


def main(argv=None):
    if argv is None:
        argv = sys.argv[1:]
    if not argv:
        print(HELP_TEXT.strip())
        return 1
    verbosity = 0
    for flag, level in (("-vv", 2), ("-v", 1)):
        if flag in argv:
            verbosity = max(verbosity, level)
            argv = [arg for arg in argv if arg != flag]
    if not argv:
        print(HELP_TEXT.strip())
        return 1
    cmd = argv[0]
    if cmd in ("--help", "-h", "help"):
        print(HELP_TEXT.strip())
        return 0
    if cmd in ("--version", "-V", "version"):
        print(__version__)
        return 0
    command = auxstate_cli.COMMANDS.get(cmd)
    if command is None:
        print(f"Unknown command '{cmd}'")
        print(HELP_TEXT.strip())
        return 1
    auxstate_cli.configure_logging(verbosity)
    return command(argv[1:])


if __name__ == "__main__":
    raise SystemExit(main())
