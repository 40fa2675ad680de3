# MIT License
#
# Copyright (c) 2024 pyimplan contributors
#
# Licensed under the MIT License. See LICENSE in the project root.

import copy
import logging
import os

import numpy as np

from pyimplan.constants import (EXPERIMENT_PRESETS, SCHEME_PRESETS,
                                GROUP_PRESETS, INSPECTION_PRESETS,
                                SOLVER_DEFAULTS, SAMPLING_STRATEGIES,
                                FAILURE_ACCRUAL_MODES, MAINTENANCE_TYPES,
                                CRACK_GROWTH_DEFAULTS,
                                CALIBRATION_FAILURE_COST, CALIBRATION_TARGET)
try:
    import colorlog  # type: ignore
    COLOR = True
except (ImportError, ModuleNotFoundError):
    COLOR = False

C_LOG_LEVEL = {
    "CRITICAL": 50,
    "ERROR": 40,
    "WARNING": 30,
    "INFO": 20,
    "DEBUG": 10,
    "NOTSET": 0
}

C_DEFAULT_ARGS = {
    "preset": None,
    "scheme": "DR_d30",
    "deterioration": {},
    "inspections": INSPECTION_PRESETS,
    "groups": "traditional",
    "costs": {
        "inspection": {"I": 1.0},
        "repair": {"perfect-repair": 10.0},
        "failure": 100.0,
        "discount": 0.95,
        "calibrate_discount": False,
        "calibration_target": CALIBRATION_TARGET,
        "calibration_failure_cost": CALIBRATION_FAILURE_COST
    },
    "horizon": None,
    "max_states": 60000,
    "samples_per_cell": 10000,
    "mcs_samples": 1000000,
    "min_ess": 100.0,
    "solver": SOLVER_DEFAULTS,
    "heuristics": {},
    "episodes": 10000,
    "max_traces": 10,
    "failure_accrual": "belief",
    "repair_failed": False,
    "seed": 0,
    "run_dir": "runs"
}

PRESET_ERR_MESSAGE = "Use `pyimplan presets` to list the available names."


class ImplanError(Exception):
    """Base class of every error raised by pyimplan."""


class ConfigError(ImplanError, KeyError):
    """Unknown preset, malformed config or value out of range."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class ImpossibleObservationError(ImplanError, ValueError):
    """Observation has zero probability under the belief and action."""


class ImpossibleEvidenceError(ImpossibleObservationError):
    """DBN evidence leaves no posterior mass."""


class UninitializedPolicyError(ImplanError, ValueError):
    """Alpha-vector set is empty."""


class DegenerateConditioningError(ImplanError, ValueError):
    """Importance weights collapsed below the effective-sample-size floor."""


class UnsupportedActionError(ImplanError, ValueError):
    """Action is not defined for this model variant."""


class StateBudgetError(ImplanError, ValueError):
    """Augmented model exceeds the configured state budget.

    :param num_states: Computed number of states of the requested model.
    :type num_states: int
    :param budget: Configured maximum number of states.
    :type budget: int
    """

    def __init__(self, num_states, budget):
        self.num_states = num_states
        self.budget = budget
        super().__init__("Augmented model needs %d states, budget is %d. "
                         "Raise `max_states` or shorten the horizon."
                         % (num_states, budget))


class DivergenceError(ImplanError, ValueError):
    """Value iteration cannot converge."""


class CalibrationError(ImplanError, ValueError):
    """Calibration target lies outside the reachable range."""


class InvalidPolicyActionError(ImplanError, ValueError):
    """Policy returned an action index outside the model's groups."""


class InterchangeParseError(ImplanError, ValueError):
    """Malformed POMDP interchange document.

    :param lineno: 1-based line number of the offending line.
    :type lineno: int
    :param message: What went wrong.
    :type message: str
    """

    def __init__(self, lineno, message):
        self.lineno = lineno
        super().__init__("line %d: %s" % (lineno, message))


def _merge(defaults, overrides):
    """Recursive dict overlay. Lists and scalars in `overrides` win."""
    merged = copy.deepcopy(defaults)
    for key, value in (overrides or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _require(condition, message):
    if not condition:
        raise ConfigError(message)


def parseInputArgs(experiment_info):
    """This method parses the experiment section of a config file. A named\
        `preset` is expanded first, user keys are laid over it and every\
        missing key is initialized as defined in C_DEFAULT_ARGS. Group and\
        inspection names are resolved against constants.py and all numeric\
        fields are range checked.

    :param experiment_info: experiment_info dictionary as read from the\
        user's input file, or a preset name.
    :type experiment_info: dict or str
    :raises ConfigError: Unknown preset/scheme/group names or values out of\
        range.
    :return: Fully resolved experiment dict.
    :rtype: dict
    """
    if isinstance(experiment_info, str):
        experiment_info = {"preset": experiment_info}
    if not isinstance(experiment_info, dict) or not experiment_info:
        raise ConfigError("Invalid input! Provide an experiment_info "
                          "section or a preset name. " + PRESET_ERR_MESSAGE)

    resolved = copy.deepcopy(C_DEFAULT_ARGS)
    preset = experiment_info.get("preset")
    if preset is not None:
        if preset not in EXPERIMENT_PRESETS:
            raise ConfigError("Unknown experiment preset - %s. %s"
                              % (preset, PRESET_ERR_MESSAGE))
        resolved = _merge(resolved, EXPERIMENT_PRESETS[preset])
    resolved = _merge(resolved, experiment_info)

    _require(resolved["scheme"] in SCHEME_PRESETS,
             "Unknown discretization scheme - %s. %s"
             % (resolved["scheme"], PRESET_ERR_MESSAGE))
    for name in resolved.get("schemes", []) + resolved.get("compare_schemes",
                                                           []):
        _require(name in SCHEME_PRESETS,
                 "Unknown discretization scheme - %s." % name)

    unknown = set(resolved["deterioration"]) - set(CRACK_GROWTH_DEFAULTS)
    _require(not unknown, "Unknown deterioration parameters %s"
             % sorted(unknown))

    groups = resolved["groups"]
    if isinstance(groups, str):
        _require(groups in GROUP_PRESETS,
                 "Unknown group preset - %s. Use one of %s"
                 % (groups, sorted(GROUP_PRESETS)))
        resolved["groups"] = copy.deepcopy(GROUP_PRESETS[groups])
    _require(isinstance(resolved["groups"], list) and resolved["groups"],
             "Provide at least one action-observation group.")
    for group in resolved["groups"]:
        _require("name" in group and "maintenance" in group,
                 "Every group needs `name` and `maintenance`: %s" % group)
        _require(group["maintenance"] in MAINTENANCE_TYPES,
                 "Unknown maintenance type - %s" % group["maintenance"])
        inspection = group.get("inspection")
        _require(inspection is None or inspection in resolved["inspections"],
                 "Group %s references unknown inspection %s"
                 % (group["name"], inspection))

    costs = resolved["costs"]
    for kind in ("inspection", "repair"):
        for name, value in costs[kind].items():
            _require(float(value) >= 0,
                     "Negative %s cost for %s" % (kind, name))
    _require(float(costs["failure"]) >= 0, "Negative failure cost.")
    _require(0 < float(costs["discount"]) <= 1,
             "discount must lie in (0, 1], got %s" % costs["discount"])
    for group in resolved["groups"]:
        inspection = group.get("inspection")
        _require(inspection is None or inspection in costs["inspection"],
                 "No inspection cost for %s" % inspection)
        _require(group["maintenance"] == "do-nothing"
                 or group["maintenance"] in costs["repair"],
                 "No repair cost for %s" % group["maintenance"])

    horizon = resolved["horizon"]
    if horizon is None:
        t_N = resolved["deterioration"].get("t_N",
                                            CRACK_GROWTH_DEFAULTS["t_N"])
        resolved["horizon"] = int(t_N)
    _require(int(resolved["horizon"]) >= 1, "horizon must be >= 1")
    _require(int(resolved["max_states"]) >= 1, "max_states must be >= 1")
    _require(int(resolved["samples_per_cell"]) >= 1,
             "samples_per_cell must be >= 1")
    _require(int(resolved["mcs_samples"]) >= 1, "mcs_samples must be >= 1")
    _require(int(resolved["episodes"]) >= 2, "episodes must be >= 2")
    _require(resolved["failure_accrual"] in FAILURE_ACCRUAL_MODES,
             "failure_accrual must be one of %s" % FAILURE_ACCRUAL_MODES)

    solver = resolved["solver"]
    unknown = set(solver) - set(SOLVER_DEFAULTS)
    _require(not unknown, "Unknown solver options %s" % sorted(unknown))
    _require(float(solver["time_budget"]) > 0, "time_budget must be > 0")
    _require(float(solver["target_gap"]) >= 0, "target_gap must be >= 0")
    _require(solver["sampling_strategy"] in SAMPLING_STRATEGIES,
             "sampling_strategy must be one of %s" % SAMPLING_STRATEGIES)
    return resolved


def console_logger(name, level=None):
    """This method create an instance of python logging and sets the following\
        format for log messages.\n<date> <time> - <name> - <level> - <message>

    :param name: String displayed after data and time. Define it to identify\
        from which part of the code, log message is generated.
    :type name: str
    :param level: Logging level name, defaults to the PYIMPLAN_LOG_LEVEL\
        environment variable or "INFO".
    :type level: str, optional
    :return: An instance of class logging
    :rtype: class:`logging.Logger`
    """
    if level is None:
        level = os.environ.get("PYIMPLAN_LOG_LEVEL", "INFO").upper()
    logger = logging.getLogger(name)
    logger.setLevel(C_LOG_LEVEL[level])
    if logger.handlers:
        return logger

    channel_handler = logging.StreamHandler()
    format = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    date_format = '%Y-%m-%d %H:%M:%S'
    if COLOR:
        f = colorlog.ColoredFormatter(
            '%(log_color)s' + format,
            date_format,
            log_colors={
                'DEBUG': 'bold_cyan',
                'INFO': 'blue',
                'WARNING': 'yellow',
                'ERROR': 'red',
                'CRITICAL': 'bold_red'})
    else:
        f = logging.Formatter(format, date_format)
    channel_handler.setFormatter(f)
    logger.addHandler(channel_handler)
    logger.propagate = False
    return logger


def set_log_level(level):
    """Apply `level` to every logger created through console_logger."""
    for name in list(logging.root.manager.loggerDict):
        candidate = logging.getLogger(name)
        if candidate.handlers and not candidate.propagate:
            candidate.setLevel(C_LOG_LEVEL[level.upper()])


def worker_count(default=1):
    """Number of pool workers, from PYIMPLAN_THREADS when set.

    :rtype: int
    """
    value = os.environ.get("PYIMPLAN_THREADS")
    if not value:
        return default
    try:
        return max(1, int(value))
    except ValueError:
        raise ConfigError("PYIMPLAN_THREADS must be an integer, got %r"
                          % value)


def substream(seed, *key):
    """Independent generator for the substream `key` of `seed`.

    Substreams are addressed by position, so a result never depends on how
    work is split across workers.

    :param seed: Root seed.
    :type seed: int
    :return: Generator seeded with SeedSequence(seed, spawn_key=key).
    :rtype: class:`numpy.random.Generator`
    """
    sequence = np.random.SeedSequence(int(seed),
                                      spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(sequence)
