# MIT License
#
# Copyright (c) 2024 pyimplan contributors
#
# Licensed under the MIT License. See LICENSE in the project root.

import os
import time

from pyimplan.base_utils import (console_logger, parseInputArgs, ConfigError,
                                 ImplanError)
from pyimplan.constants import EXPERIMENT_PRESETS, SCHEME_PRESETS
from pyimplan.discretization_dbn import (compile_named_scheme, save_dbn,
                                         unroll_failure_curve,
                                         discretization_error)
from pyimplan.fatigue_model import (CrackGrowthParams, make_curve,
                                    reference_failure_curve)
from pyimplan.im_builder import (CostSpec, make_groups, assemble_infinite,
                                 assemble_finite)
from pyimplan.interchange import write_interchange, read_interchange
from pyimplan.pbvi_solver import (SolverConfig, solve, extract_policy,
                                  policy_vectors, save_policy, load_policy,
                                  trace_rows)
from pyimplan.policy_eval import (simulate_policy, cost_row, histogram_rows,
                                  trace_rows as realization_rows)
from pyimplan.pomdp_core import validate
from pyimplan.rbi_heuristics import (HeuristicPolicy, build_rules,
                                     grid_search, grid_table_rows,
                                     evaluate_analytic,
                                     evaluate_simulated, calibrate_discount)
from pyimplan.workflows.workflows_utils import dict_list_to_csv, dict_to_yaml

SUBCOMMANDS = {
    "discretize": "discretize",
    "build": "build",
    "solve": "solve",
    "heuristics": "heuristics",
    "evaluate": "evaluate",
    "export": "export",
    "import": "import_model",
    "reproduce": "reproduce",
    "presets": "presets"
}


class ImPlanningBase:
    """This is the session class of an I&M planning experiment which\
        handles - \n
    1. configuration: presets are expanded and validated once, and the\
        resolved config is recorded in the run directory.
    2. lazy construction of the crack growth parameters, compiled DBNs,\
        action-observation groups, costs (with optional discount\
        calibration) and the infinite- and finite-horizon POMDPs.
    3. command function dispatches the subcommands of the `pyimplan` CLI\
        and writes their artifacts into the run directory.

    :param experiment_info: Experiment section of a config file, or a preset\
        name. \n
        * keyword preset: (Optional) Name of an experiment preset. \n
        * keyword scheme: (Optional) Discretization scheme name. \n
        * keyword costs: (Optional) inspection, repair, failure, discount. \n
        * keyword run_dir: (Optional) Directory for artifacts. \n
        All keys and their defaults are listed in C_DEFAULT_ARGS.
    :type experiment_info: dict or str
    :param logger: Provide an instance of class:`logging.logger`, defaults to\
        logger class with name "IMPLAN_BASE".
    :type logger: class:`logging.logger`, optional
    """

    def __init__(self, experiment_info, logger=None):
        """Constructor Method resolves the experiment config."""
        self.experiment_info = parseInputArgs(experiment_info)
        self.logger = logger if logger else console_logger("IMPLAN_BASE")
        self.run_dir = self.experiment_info["run_dir"]
        self._params = None
        self._dbns = {}
        self._costs = None
        self._models = {}
        self._bounds = {}
        self._seed_rules = {}
        self._config_written = False

    @property
    def name(self):
        return self.experiment_info.get("preset") or "custom"

    @property
    def seed(self):
        return int(self.experiment_info["seed"])

    @property
    def horizon(self):
        return int(self.experiment_info["horizon"])

    @property
    def params(self):
        if self._params is None:
            self._params = CrackGrowthParams.from_dict(
                self.experiment_info["deterioration"])
        return self._params

    def curve(self, name):
        """Inspection curve configured under `name`."""
        inspections = self.experiment_info["inspections"]
        if name not in inspections:
            raise ConfigError("Unknown inspection - %s" % name)
        return make_curve(inspections[name])

    def dbn(self, scheme=None):
        """Compiled DBN of `scheme`, defaults to the configured scheme."""
        scheme = scheme or self.experiment_info["scheme"]
        if scheme not in SCHEME_PRESETS:
            raise ConfigError("Unknown discretization scheme - %s" % scheme)
        if scheme not in self._dbns:
            self._dbns[scheme] = compile_named_scheme(
                scheme, self.params,
                samples_per_cell=int(self.experiment_info["samples_per_cell"]),
                seed=self.seed)
        return self._dbns[scheme]

    @property
    def costs(self):
        """Cost table; the discount is calibrated on first use when\
            `calibrate_discount` is set."""
        if self._costs is None:
            config = self.experiment_info["costs"]
            costs = CostSpec.from_dict(config)
            if config.get("calibrate_discount"):
                gamma = calibrate_discount(
                    self.dbn(),
                    failure_cost=float(config["calibration_failure_cost"]),
                    target=float(config["calibration_target"]),
                    horizon=self.horizon)
                costs = costs.with_discount(gamma)
            self._costs = costs
        return self._costs

    @property
    def groups(self):
        return make_groups(self.experiment_info["groups"],
                           self.experiment_info["inspections"], self.costs)

    def model(self, finite=False, scheme=None):
        """Infinite-horizon POMDP, or the time-augmented one when `finite`.

        :param scheme: Discretization scheme, defaults to the configured one.
        :type scheme: str, optional
        :raises StateBudgetError: The finite layout exceeds `max_states`.
        """
        key = (bool(finite), scheme or self.experiment_info["scheme"])
        if key not in self._models:
            config = self.experiment_info
            if finite:
                model = assemble_finite(
                    self.dbn(scheme), self.groups, self.costs, self.horizon,
                    max_states=int(config["max_states"]),
                    repair_failed=bool(config["repair_failed"]))
            else:
                model = assemble_infinite(
                    self.dbn(scheme), self.groups, self.costs,
                    repair_failed=bool(config["repair_failed"]))
            self._models[key] = model
        return self._models[key]

    def artifact(self, filename):
        """Path of `filename` inside the run directory.

        The resolved config is written the first time an artifact is\
        requested.
        """
        if not self._config_written:
            dict_to_yaml(os.path.join(self.run_dir, "resolved_config.yaml"),
                         self.experiment_info, self.logger)
            self._config_written = True
        return os.path.join(self.run_dir, filename)

    def write_rows(self, filename, rows):
        return dict_list_to_csv(self.artifact(filename), rows, self.logger)

    def _evidence(self, entries):
        return [(int(e["year"]), self.curve(e["inspection"]),
                 int(e.get("outcome", 0))) for e in entries or []]

    def discretize(self, schemes=None):
        """Compile the schemes and compare their failure curves with a Monte\
            Carlo reference, without and with the configured conditioning.

        :param schemes: Scheme names, defaults to `schemes` or `scheme` of\
            the config.
        :type schemes: list, optional
        :return: One xi row per scheme and conditioning case.
        :rtype: list
        """
        config = self.experiment_info
        names = schemes or config.get("schemes") or [config["scheme"]]
        cases = [("none", [])]
        if config.get("conditioning"):
            cases.append(("conditioned",
                          self._evidence(config["conditioning"])))

        references = {}
        for label, evidence in cases:
            references[label] = reference_failure_curve(
                self.params, int(config["mcs_samples"]), seed=self.seed,
                inspections=evidence, min_ess=float(config["min_ess"]))

        rows = []
        curves = {label: {"mcs": references[label]} for label, _ in cases}
        for name in names:
            dbn = self.dbn(name)
            save_dbn(dbn, self.artifact(name + ".npz"))
            for label, evidence in cases:
                curve = unroll_failure_curve(dbn, evidence)
                curves[label][name] = curve
                xi = discretization_error(curve, references[label])
                rows.append({"scheme": name, "variant": dbn.variant,
                             "num_states": dbn.num_states,
                             "conditioning": label, "xi": xi})
                self.logger.info("%s (%s): xi = %.3g" % (name, label, xi))

        curve_rows = []
        for label, series in curves.items():
            for year in range(self.params.t_N + 1):
                row = {"conditioning": label, "year": year}
                row.update({key: float(values[year])
                            for key, values in series.items()})
                curve_rows.append(row)
        self.write_rows("xi_report.csv", rows)
        self.write_rows("failure_curves.csv", curve_rows)
        return rows

    def build(self, finite=False):
        """Assemble and validate the POMDP.

        :return: Sizes, discount and the violation messages.
        :rtype: dict
        """
        model = self.model(finite)
        violations = validate(model)
        for violation in violations:
            self.logger.warning(violation.message)
        summary = {"finite": bool(finite),
                   "num_states": model.num_states,
                   "num_actions": model.num_actions,
                   "num_observations": model.num_observations,
                   "discount": model.discount,
                   "actions": list(model.action_names or ()),
                   "violations": [v.message for v in violations]}
        dict_to_yaml(self.artifact("build_summary.yaml"), summary,
                     self.logger)
        return summary

    def _tag(self, finite, scheme=None):
        tag = "finite" if finite else "infinite"
        return tag + "-" + scheme if scheme else tag

    def _policy_file(self, finite, scheme=None):
        if not finite and not scheme:
            return "policy.npz"
        return "policy-%s.npz" % self._tag(finite, scheme)

    def seed_rules(self, scheme=None):
        """Analytically optimized repair-on-detection rules of the\
            configured heuristic families; they seed the solver."""
        if scheme not in self._seed_rules:
            grid = self.experiment_info["heuristics"]
            dbn, costs, horizon = self.dbn(scheme), self.costs, self.horizon
            rules = []
            for family in grid.get("families", []):
                if family.get("maintenance", "repair-on-detection") \
                        != "repair-on-detection":
                    continue
                rule, _, _ = grid_search(
                    build_rules(family, grid,
                                self.experiment_info["inspections"]),
                    lambda r: evaluate_analytic(dbn, r, costs, horizon))
                rules.append(rule)
            self._seed_rules[scheme] = rules
        return self._seed_rules[scheme]

    def seed_vectors(self, model, options, scheme=None):
        """Plan vectors of the seed rules on `model`, empty when\
            `seed_heuristics` is off."""
        if not options.get("seed_heuristics"):
            return []
        seeds = []
        for rule in self.seed_rules(scheme):
            policy = HeuristicPolicy(model, self.groups, rule, self.horizon)
            seeds.append(policy_vectors(model, policy, self.horizon,
                                        int(options["plan_vectors"])))
            self.logger.info("Seeded the lower bound with %s" % rule.name)
        return seeds

    def solve(self, finite=False, config=None, scheme=None):
        """Run the point-based solver and store the policy and trace.

        :param config: Solver options laid over the configured ones.
        :type config: dict, optional
        :param scheme: Discretization scheme, defaults to the configured one.
        :type scheme: str, optional
        :return: (bounds, trace)
        :rtype: tuple
        """
        options = dict(self.experiment_info["solver"])
        options["seed"] = self.seed
        options.update(config or {})
        model = self.model(finite, scheme)
        bounds, trace = solve(model, SolverConfig.from_dict(options),
                              self.seed_vectors(model, options, scheme))
        tag = self._tag(finite, scheme)
        strategy = options.get("sampling_strategy", "gap-driven")
        if strategy != "gap-driven":
            tag += "-" + strategy.split("-")[0]
        else:
            self._bounds[(bool(finite), scheme)] = bounds
            save_policy(extract_policy(bounds),
                        self.artifact(self._policy_file(finite, scheme)))
        self.write_rows("trace-%s.csv" % tag, trace_rows(trace))
        self.logger.info("Expected cost bounds at b0: [%.4f, %.4f] (%s)"
                         % (-trace[-1].upper, -trace[-1].lower,
                            bounds.status))
        return bounds, trace

    def policy(self, finite=False, scheme=None):
        """Policy of the last solve, the stored policy file, or a new solve."""
        key = (bool(finite), scheme)
        if key in self._bounds:
            return extract_policy(self._bounds[key])
        path = os.path.join(self.run_dir, self._policy_file(finite, scheme))
        if os.path.exists(path):
            policy = load_policy(path)
            if policy.alpha_set.vectors.shape[1] \
                    != self.model(finite, scheme).num_states:
                raise ConfigError("%s does not match the model size; "
                                  "solve again" % path)
            self.logger.info("Loaded policy from %s" % path)
            return policy
        return extract_policy(self.solve(finite, scheme=scheme)[0])

    def heuristics(self, families=None):
        """Grid search every heuristic family of the config.

        Repair-on-detection rules are scored analytically, the others by\
        simulation with `grid_episodes` episodes. heuristics.csv lists the\
        grid-search seconds of each family next to its cost, to set against\
        the solver traces.

        :return: Family name to (best rule, best result).
        :rtype: dict
        """
        grid = self.experiment_info["heuristics"]
        families = families or grid.get("families", [])
        if not families:
            raise ConfigError("No heuristic families configured")
        inspections = self.experiment_info["inspections"]
        best = {}
        summary = []
        for family in families:
            rules = build_rules(family, grid, inspections)
            start = time.perf_counter()
            best_rule, result, table = grid_search(
                rules, self.heuristic_evaluator(
                    family, int(grid.get("grid_episodes", 1000))))
            best[family["name"]] = (best_rule, result)
            self.write_rows("grid-%s.csv" % family["name"],
                            grid_table_rows(table))
            row = best_rule.describe()
            row.update(cost_row(family["name"], result))
            row["seconds"] = time.perf_counter() - start
            summary.append(row)
        self.write_rows("heuristics.csv", summary)
        return best

    def heuristic_evaluator(self, family, num_episodes):
        """Callable rule -> cost used by the grid search of `family`."""
        if family.get("maintenance",
                      "repair-on-detection") == "repair-on-detection":
            dbn, costs, horizon = self.dbn(), self.costs, self.horizon
            return lambda rule: evaluate_analytic(dbn, rule, costs, horizon)
        return lambda rule: self.simulate_rule(rule, num_episodes,
                                               max_traces=0)

    def simulate_rule(self, rule, num_episodes=None, max_traces=None):
        config = self.experiment_info
        return evaluate_simulated(
            self.model(), self.groups, rule, self.costs,
            int(num_episodes or config["episodes"]), self.horizon,
            seed=self.seed, failure_accrual=config["failure_accrual"],
            max_traces=(config["max_traces"] if max_traces is None
                        else max_traces))

    def simulate(self, policy, finite=False, tag="policy", scheme=None):
        """Simulate `policy` and write its cost, histogram and realizations.

        :rtype: class:`pyimplan.policy_eval.EvaluationResult`
        """
        config = self.experiment_info
        model = self.model(finite, scheme)
        result = simulate_policy(
            model, policy, int(config["episodes"]), self.horizon,
            seed=self.seed, groups=self.groups,
            failure_cost=self.costs.failure,
            failure_accrual=config["failure_accrual"],
            max_traces=int(config["max_traces"]))
        self.write_rows("histogram-%s.csv" % tag,
                        histogram_rows(result, model))
        self.write_rows("realizations-%s.csv" % tag,
                        realization_rows(result.traces, model))
        return result

    def evaluate(self, finite=False):
        """Simulate the POMDP policy over the configured horizon.

        :rtype: class:`pyimplan.policy_eval.EvaluationResult`
        """
        tag = "finite" if finite else "infinite"
        result = self.simulate(self.policy(finite), finite, tag)
        self.write_rows("evaluation-%s.csv" % tag,
                        [cost_row("POMDP-%s" % tag, result)])
        return result

    def export(self, finite=False, output=None):
        """Write the POMDP in the interchange format."""
        path = output or self.artifact("model.pomdp")
        return write_interchange(self.model(finite), path)

    def import_model(self, path):
        """Read and validate an interchange file.

        :return: The model and its violations.
        :rtype: tuple
        """
        if not os.path.exists(path):
            raise ConfigError("File %s not found" % path)
        model = read_interchange(path)
        violations = validate(model)
        self.logger.info("Imported %d states, %d actions, %d observations "
                         "from %s" % (model.num_states, model.num_actions,
                                      model.num_observations, path))
        for violation in violations:
            self.logger.warning(violation.message)
        return model, violations

    def reproduce(self):
        """Run the full pipeline of the configured experiment."""
        from pyimplan.workflows.reproduce import reproduce_experiment
        return reproduce_experiment(self)

    @staticmethod
    def presets():
        return {"experiments": list(EXPERIMENT_PRESETS),
                "schemes": list(SCHEME_PRESETS)}

    def command(self, subcommand, **kwargs):
        """This function runs one of the subcommands of the `pyimplan` CLI.

        :param subcommand: One of discretize, build, solve, heuristics,\
            evaluate, export, import, reproduce, presets.
        :type subcommand: str
        :param kwargs: Keyword arguments of the matching method, e.g.\
            `finite` or `output`.
        :raises ConfigError: Unknown subcommand.
        :return: Whatever the subcommand returns.
        """
        if subcommand not in SUBCOMMANDS:
            raise ConfigError("Unknown subcommand - %s. Use one of %s"
                              % (subcommand, sorted(SUBCOMMANDS)))
        self.logger.info("Running %s for experiment %s"
                         % (subcommand, self.name))
        try:
            return getattr(self, SUBCOMMANDS[subcommand])(**kwargs)
        except ImplanError as err:
            self.logger.error("%s failed: %s" % (subcommand, str(err)))
            raise
