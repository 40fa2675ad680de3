# MIT License
#
# Copyright (c) 2024 pyimplan contributors
#
# Licensed under the MIT License. See LICENSE in the project root.

"""Command line front end, installed as ``pyimplan``.

Usage::

    pyimplan reproduce R_RI50-R_FR20 --run-dir runs/exp3
    pyimplan solve sample_scripts/experiment.yaml --finite
    pyimplan export DR_toy.yaml --output model.pomdp
    pyimplan import model.pomdp
    pyimplan presets

Exit codes: 0 on success, 1 for configuration problems (unknown preset,
malformed or missing config, state budget overflow), 2 for any other
planning failure.
"""

import argparse
import os
import sys

from pyimplan.base import ImPlanningBase, SUBCOMMANDS
from pyimplan.base_utils import (console_logger, set_log_level, C_LOG_LEVEL,
                                 ConfigError, ImplanError, StateBudgetError)
from pyimplan.workflows.workflows_utils import get_experiment_from_file

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERIC = 2

CONFIG_EXTENSIONS = (".yaml", ".yml", ".json")

logger = console_logger("PYIMPLAN_CLI")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pyimplan",
        description="Inspection and maintenance planning with POMDPs.")
    parser.add_argument("subcommand", choices=sorted(SUBCOMMANDS))
    parser.add_argument("target", nargs="?",
                        help="Config file or preset name; the interchange "
                             "file for `import`.")
    parser.add_argument("--run-dir", help="Directory for artifacts.")
    parser.add_argument("--seed", type=int, help="Root seed.")
    parser.add_argument("--log-level", choices=sorted(C_LOG_LEVEL),
                        help="Logging level, defaults to INFO.")
    parser.add_argument("--output", help="Output path of `export`.")
    parser.add_argument("--finite", action="store_true",
                        help="Use the time-augmented finite-horizon model.")
    return parser


def make_session(target, overrides):
    """Session from a config file path or an experiment preset name."""
    if target is None:
        raise ConfigError("Provide a config file or a preset name.")
    if os.path.splitext(target)[1] in CONFIG_EXTENSIONS:
        if not os.path.exists(target):
            raise ConfigError("File %s not found" % target)
        return get_experiment_from_file(target, logger=logger,
                                        overrides=overrides)
    experiment_info = {"preset": target}
    experiment_info.update(overrides)
    return ImPlanningBase(experiment_info)


def _report(subcommand, result):
    if subcommand == "presets":
        for kind, names in result.items():
            print("%s:" % kind)
            for name in names:
                print("  %s" % name)
    elif subcommand == "build":
        logger.info("%d states, %d actions, %d observations, %d violations"
                    % (result["num_states"], result["num_actions"],
                       result["num_observations"],
                       len(result["violations"])))
    elif subcommand == "evaluate":
        logger.info("E[C_T] = %.4f (+/- %.4f) over %d episodes"
                    % (result.mean, result.ci, result.num_episodes))
    elif subcommand == "export":
        logger.info("Model written to %s" % result)


def run(argv=None):
    """Parse `argv`, run the subcommand and return the exit status."""
    args = build_parser().parse_args(argv)
    if args.log_level:
        os.environ["PYIMPLAN_LOG_LEVEL"] = args.log_level
        set_log_level(args.log_level)

    if args.subcommand == "presets":
        _report("presets", ImPlanningBase.presets())
        return EXIT_OK

    overrides = {}
    if args.run_dir:
        overrides["run_dir"] = args.run_dir
    if args.seed is not None:
        overrides["seed"] = args.seed
    try:
        if args.subcommand == "import":
            if not args.target:
                raise ConfigError("Provide the interchange file to import.")
            session = ImPlanningBase(dict(overrides, preset=None))
            _, violations = session.command("import", path=args.target)
            return EXIT_OK if not violations else EXIT_NUMERIC

        session = make_session(args.target, overrides)
        kwargs = {}
        if args.subcommand in ("build", "solve", "evaluate", "export"):
            kwargs["finite"] = args.finite
        if args.subcommand == "export" and args.output:
            kwargs["output"] = args.output
        result = session.command(args.subcommand, **kwargs)
        _report(args.subcommand, result)
    except (ConfigError, StateBudgetError) as err:
        logger.error(str(err))
        return EXIT_CONFIG
    except OSError as err:
        logger.error(str(err))
        return EXIT_CONFIG
    except (ImplanError, ValueError) as err:
        logger.error(str(err))
        return EXIT_NUMERIC
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
