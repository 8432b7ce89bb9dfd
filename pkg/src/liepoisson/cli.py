"""Command line interface: run, list, and validate experiments.

``liepoisson run <config>`` executes an experiment file (or a built-in
experiment named directly) and writes its orbit CSV and diagnostics
JSON; ``liepoisson list`` shows the built-in experiments;
``liepoisson validate <config>`` checks a file against the schema
without running it.

Exit codes: 0 success; 2 configuration error (schema violation, unknown
catalog name, bad parameter); 3 range error (an initial condition that
cannot be lifted through the momentum map); 4 integration failure (a
stage solver failed to converge; partial output is still written);
1 operating-system errors such as an unwritable output directory.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import __version__
from .config import ConfigError, load_config
from .experiments import (BUILTIN_EXPERIMENTS, builtin_config,
                          builtin_descriptions, run_experiment)
from .geometry import ConfigurationError, RangeError, StepFailureError

__all__ = ["main"]

EXIT_OK = 0
EXIT_IO = 1
EXIT_CONFIG = 2
EXIT_RANGE = 3
EXIT_INTEGRATION = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="liepoisson",
        description="Structure-preserving Lie-Poisson integration "
                    "through collective Hamiltonians.")
    parser.add_argument("--version", action="version",
                        version=f"liepoisson {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser(
        "run", help="run an experiment file or a built-in experiment")
    run.add_argument("config",
                     help="path to an experiment file, or the name of a "
                          "built-in experiment (see 'list')")
    run.add_argument("--output-dir", default=".",
                     help="directory for output files (default: current "
                          "directory)")
    run.add_argument("--threads", type=int, default=1,
                     help="integrate batch initial conditions with this "
                          "many worker threads (default: 1)")
    run.add_argument("--gnuplot-script", action="store_true",
                     help="also write a companion gnuplot script")

    sub.add_parser("list", help="list built-in experiments")

    validate = sub.add_parser(
        "validate", help="validate an experiment file against the schema")
    validate.add_argument("config",
                          help="path to an experiment file, or the name "
                               "of a built-in experiment")
    return parser


def _resolve_config(source: str):
    """A path on disk wins; otherwise built-in names are accepted."""
    if not os.path.exists(source) and source in BUILTIN_EXPERIMENTS:
        return builtin_config(source)
    return load_config(source)


def _cmd_run(args) -> int:
    cfg = _resolve_config(args.config)
    if args.threads < 1:
        print("config error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    result = run_experiment(cfg, output_dir=args.output_dir,
                            threads=args.threads,
                            gnuplot_script=args.gnuplot_script)
    for path in result.files:
        print(f"wrote {path}")
    if result.failures:
        for index, message in result.failures:
            print(f"trajectory {index} failed: {message}", file=sys.stderr)
        print(f"experiment {cfg.name!r}: partial output written",
              file=sys.stderr)
        return EXIT_INTEGRATION
    return EXIT_OK


def _cmd_list() -> int:
    width = max(len(name) for name, _ in builtin_descriptions())
    for name, description in builtin_descriptions():
        print(f"{name:<{width}}  {description}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    cfg = _resolve_config(args.config)
    batch = (cfg.initial.count if cfg.initial.form == "random"
             else len(cfg.initial.points))
    print(f"{args.config}: valid experiment {cfg.name!r} "
          f"({cfg.realization_id} / {cfg.hamiltonian_name}, "
          f"{cfg.integrator.method}, {batch} initial condition(s), "
          f"output kind {cfg.output.kind!r})")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "list":
            return _cmd_list()
        return _cmd_validate(args)
    except RangeError as err:
        print(f"range error: {err}", file=sys.stderr)
        return EXIT_RANGE
    except (ConfigError, ConfigurationError) as err:
        print(f"{err}" if isinstance(err, ConfigError)
              else f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except StepFailureError as err:
        print(f"integration failure: {err}", file=sys.stderr)
        return EXIT_INTEGRATION
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
