# MIT License
#
# Copyright (c) 2024 pyimplan contributors
#
# Licensed under the MIT License. See LICENSE in the project root.

"""Risk-based inspection baselines.

Heuristic rules pair an inspection plan (equidistant or annual failure
probability threshold) with a maintenance rule. They are evaluated either
analytically along the single no-detection branch of the DBN or by
simulation through the shared policy engine.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations_with_replacement
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from pyimplan.base_utils import (console_logger, worker_count,
                                 CalibrationError)
from pyimplan.constants import (MAINTENANCE_SEVERITY,
                                CALIBRATION_FAILURE_COST, CALIBRATION_TARGET,
                                CALIBRATION_BRACKET)
from pyimplan.discretization_dbn import (condition, likelihood_matrix,
                                         unroll_failure_curve)
from pyimplan.fatigue_model import make_curve, num_outcomes
from pyimplan.policy_eval import simulate_policy
from pyimplan.pomdp_core import BeliefState

logger = console_logger("RBI_HEURISTICS")

PLAN_KINDS = ["none", "equidistant", "threshold"]
MAINTENANCE_RULES = ["repair-on-detection", "observation-map",
                     "pf-threshold", "ed-threshold"]

SHORT_NAMES = {
    "do-nothing": "DN",
    "minor-repair": "mRP",
    "perfect-repair": "pRP"
}


@dataclass(frozen=True)
class InspectionPlan:
    """When to inspect.

    Equidistant plans inspect at years k * interval; threshold plans
    inspect at the end of year t when the annual failure probability
    increment of year t would exceed `threshold`. The no-detection outcome
    then pulls the billed increment back under the threshold. Inspections
    never fall on or after the last year of the horizon.
    """

    kind: str = "none"
    inspection: Optional[str] = None
    curve: Optional[object] = None
    interval: Optional[int] = None
    threshold: Optional[float] = None

    def __post_init__(self):
        if self.kind not in PLAN_KINDS:
            raise ValueError("Unknown inspection plan - %s" % self.kind)
        if self.kind != "none" and self.curve is None:
            raise ValueError("%s plan needs an inspection curve" % self.kind)
        if self.kind == "equidistant" and not (self.interval or 0) >= 1:
            raise ValueError("inspection interval must be >= 1")
        if self.kind == "threshold" and not (self.threshold or 0) > 0:
            raise ValueError("inspection threshold must be > 0")

    @property
    def observes(self):
        return self.kind != "none"


@dataclass(frozen=True)
class MaintenanceRule:
    """What to do after an inspection outcome.

    :param kind: repair-on-detection, observation-map, pf-threshold or\
        ed-threshold.
    :type kind: str
    :param mapping: Maintenance type per indicator (observation-map).
    :type mapping: tuple, optional
    :param threshold: P_F or E[d] level above which `action` is taken.
    :type threshold: float, optional
    :param action: Maintenance type of threshold rules.
    :type action: str, optional
    """

    kind: str = "repair-on-detection"
    mapping: Tuple[str, ...] = ()
    threshold: Optional[float] = None
    action: str = "perfect-repair"

    def __post_init__(self):
        if self.kind not in MAINTENANCE_RULES:
            raise ValueError("Unknown maintenance rule - %s" % self.kind)
        if self.kind == "observation-map" and not self.mapping:
            raise ValueError("observation-map rule needs a mapping")
        if self.kind in ("pf-threshold", "ed-threshold") \
                and not (self.threshold or 0) > 0:
            raise ValueError("maintenance threshold must be > 0")
        object.__setattr__(self, "mapping", tuple(self.mapping))

    @property
    def label(self):
        if self.kind == "repair-on-detection":
            return "pRP-D"
        if self.kind == "observation-map":
            return "/".join(SHORT_NAMES[m] for m in self.mapping)
        quantity = "PF" if self.kind == "pf-threshold" else "E[d]"
        return "%s-%s>%g" % (SHORT_NAMES[self.action], quantity,
                             self.threshold)

    def decide(self, observation, belief, model):
        """Maintenance type to apply after `observation`."""
        if self.kind == "repair-on-detection":
            return "perfect-repair" if observation >= 1 else "do-nothing"
        if self.kind == "observation-map":
            return self.mapping[observation]
        if self.kind == "pf-threshold":
            level = float(belief.probs[model.failure_mask].sum())
        else:
            level = float(belief.probs @ model.state_features["damage"])
        return self.action if level > self.threshold else "do-nothing"


@dataclass(frozen=True)
class HeuristicRule:
    name: str
    plan: InspectionPlan
    maintenance: MaintenanceRule = MaintenanceRule()

    def describe(self):
        return {
            "family": self.name,
            "plan": self.plan.kind,
            "inspection": self.plan.inspection or "",
            "interval": self.plan.interval or "",
            "threshold": self.plan.threshold or "",
            "maintenance": self.maintenance.label
        }

    def sort_key(self):
        """Smaller interval first, then larger threshold."""
        return (self.plan.interval or 0, -(self.plan.threshold or 0.0))


@dataclass(frozen=True)
class CostBreakdown:
    """Analytic E[C_I], E[C_R], E[C_F] of one rule."""

    inspection: float
    repair: float
    failure: float
    inspection_years: Tuple[int, ...] = ()

    @property
    def total(self):
        return self.inspection + self.repair + self.failure

    @property
    def ci(self):
        return 0.0

    @property
    def breakdown(self):
        return {"inspection": self.inspection, "repair": self.repair,
                "failure": self.failure}


def plan_inspects(plan, year, probs, transition_t, failure_mask, horizon):
    """True when the plan inspects the state reached at the end of `year`.

    :param probs: Belief at the start of `year`.
    :type probs: class:`numpy.ndarray`
    :param transition_t: Transposed do-nothing transition.
    :type transition_t: class:`scipy.sparse.csr_matrix`
    """
    inspected_year = year + 1
    if not plan.observes or inspected_year >= horizon:
        return False
    if plan.kind == "equidistant":
        return inspected_year % plan.interval == 0
    predicted = transition_t @ probs
    return float(predicted[failure_mask].sum() - probs[failure_mask].sum()) \
        > plan.threshold


def evaluate_analytic(dbn, rule, costs, horizon=None):
    """Expected costs along the single no-detection branch.

    A detection triggers a perfect repair that is billed with the detection
    probability; the component then continues as if nothing had been
    detected. In an inspection year only the failures that escape detection
    are billed. Costs of year t are discounted with gamma^t.

    :param dbn: Compiled deterioration model.
    :type dbn: class:`pyimplan.discretization_dbn.CompiledDbn`
    :param rule: Rule with repair-on-detection maintenance.
    :type rule: class:`HeuristicRule`
    :param costs: Cost table.
    :type costs: class:`pyimplan.im_builder.CostSpec`
    :raises ValueError: Other maintenance rules need simulation.
    :rtype: class:`CostBreakdown`
    """
    if rule.maintenance.kind != "repair-on-detection":
        raise ValueError("analytic evaluation needs repair-on-detection "
                         "maintenance, got %s" % rule.maintenance.kind)
    horizon = int(horizon or dbn.params.t_N)
    gamma = costs.discount
    plan = rule.plan
    table = None
    if plan.observes:
        table = likelihood_matrix(dbn, plan.curve)
        inspection_cost = costs.inspection[plan.inspection]
        repair_cost = costs.repair.get("perfect-repair", 0.0)

    mask = dbn.failure_mask
    belief = BeliefState(dbn.initial_belief)
    inspection = repair = failure = 0.0
    years = []
    for year in range(horizon):
        discount = gamma ** (year + 1)
        predicted = dbn.transition_t @ belief.probs
        if plan_inspects(plan, year, belief.probs, dbn.transition_t, mask,
                         horizon):
            missed = table[:, 0]
            no_detection = float(predicted @ missed)
            # failed states absorb, so `carried` is last year's failures
            carried = dbn.transition_t @ (belief.probs * mask)
            newly = float((predicted * mask - carried) @ missed)
            failure += costs.failure * discount * newly / no_detection
            inspection += inspection_cost * discount
            repair += repair_cost * (1.0 - no_detection) * discount
            belief = condition(BeliefState(predicted), (table, 0))
            years.append(year + 1)
        else:
            failure += costs.failure * discount * float(
                predicted[mask].sum() - belief.probs[mask].sum())
            belief = BeliefState(predicted)
    return CostBreakdown(inspection, repair, failure, tuple(years))


def _find_group(groups, maintenance, inspection):
    for index, group in enumerate(groups):
        if group.maintenance == maintenance \
                and group.inspection == inspection:
            return index
    return None


class HeuristicPolicy(object):
    """Run a HeuristicRule through the policy engine.

    :param model: Model the rule acts on.
    :type model: class:`pyimplan.pomdp_core.DiscretePomdp`
    :param groups: Action-observation groups of `model`.
    :type groups: list
    :param rule: The heuristic.
    :type rule: class:`HeuristicRule`
    :param horizon: Last year of the plan, defaults to the number of\
        decision years simulated.
    :type horizon: int
    """

    def __init__(self, model, groups, rule, horizon):
        self.model = model
        self.groups = groups
        self.rule = rule
        self.horizon = int(horizon)
        self.idle = _find_group(groups, "do-nothing", None)
        if self.idle is None:
            raise ValueError("heuristic policies need a do-nothing/"
                             "no-inspection group")
        self.inspect = self.idle
        if rule.plan.observes:
            self.inspect = _find_group(groups, "do-nothing",
                                       rule.plan.inspection)
            if self.inspect is None:
                raise ValueError("no do-nothing group inspects with %s"
                                 % rule.plan.inspection)
        self.transition_t = model.transition_transposed[self.idle]

    def inspects(self, year, belief):
        return plan_inspects(self.rule.plan, year, belief.probs,
                             self.transition_t, self.model.failure_mask,
                             self.horizon)

    def maintenance_group(self, maintenance, inspect):
        """Group for `maintenance`, inspecting too when such a group exists."""
        if inspect:
            combined = _find_group(self.groups, maintenance,
                                   self.rule.plan.inspection)
            if combined is not None:
                return combined
        index = _find_group(self.groups, maintenance, None)
        if index is None:
            raise ValueError("no %s group without inspection" % maintenance)
        return index

    def controller(self):
        return _HeuristicController(self)


class _HeuristicController(object):
    def __init__(self, policy):
        self.policy = policy
        self.pending = None

    def act(self, year, belief):
        inspect = self.policy.inspects(year, belief)
        if self.pending is not None:
            action = self.policy.maintenance_group(self.pending, inspect)
            self.pending = None
            return action
        return self.policy.inspect if inspect else self.policy.idle

    def observe(self, group, observation, belief):
        policy = self.policy
        plan = policy.rule.plan
        if not plan.observes or policy.groups[group].inspection \
                != plan.inspection:
            return
        decision = policy.rule.maintenance.decide(observation, belief,
                                                  policy.model)
        if decision != "do-nothing":
            self.pending = decision


def evaluate_simulated(model, groups, rule, costs, num_episodes, horizon,
                       seed=0, failure_accrual="belief", max_traces=10,
                       num_workers=None):
    """Monte Carlo E[C_T] of a rule; repairs return the component to its
    initial condition.

    :rtype: class:`pyimplan.policy_eval.EvaluationResult`
    """
    policy = HeuristicPolicy(model, groups, rule, horizon)
    return simulate_policy(model, policy, num_episodes, horizon, seed=seed,
                           groups=groups, failure_cost=costs.failure,
                           failure_accrual=failure_accrual,
                           max_traces=max_traces, num_workers=num_workers)


def monotone_observation_maps(num_indicators, actions):
    """Maps from indicator to maintenance type that never pick a milder
    action for a more severe indicator.
    """
    ordered = sorted(actions, key=MAINTENANCE_SEVERITY.__getitem__)
    return [tuple(m) for m in
            combinations_with_replacement(ordered, num_indicators)]


def _curve(inspections, name):
    curve = inspections[name]
    return make_curve(curve) if isinstance(curve, dict) else curve


def build_rules(family, grid, inspections):
    """Expand one rule family over its parameter grid.

    :param family: e.g. {"name": "THR-INS2-ED", "plan": "threshold",\
        "inspection": "I2", "maintenance": "ed-threshold"}.
    :type family: dict
    :param grid: intervals, thresholds, pf_thresholds, ed_thresholds and\
        repair_actions lists.
    :type grid: dict
    :param inspections: Inspection name to curve or curve definition.
    :type inspections: dict
    :rtype: list
    """
    kind = family.get("plan", "none")
    name = family.get("inspection")
    curve = _curve(inspections, name) if kind != "none" else None
    if kind == "equidistant":
        plans = [InspectionPlan(kind, name, curve, interval=int(i))
                 for i in grid["intervals"]]
    elif kind == "threshold":
        plans = [InspectionPlan(kind, name, curve, threshold=float(x))
                 for x in grid["thresholds"]]
    else:
        plans = [InspectionPlan()]

    rule = family.get("maintenance", "repair-on-detection")
    if rule == "observation-map":
        maps = monotone_observation_maps(
            num_outcomes(curve),
            grid.get("repair_actions", list(MAINTENANCE_SEVERITY)))
        maintenance = [MaintenanceRule(rule, mapping=m) for m in maps]
    elif rule in ("pf-threshold", "ed-threshold"):
        key = "pf_thresholds" if rule == "pf-threshold" else "ed_thresholds"
        maintenance = [MaintenanceRule(rule, threshold=float(x),
                                       action=family.get("action",
                                                         "perfect-repair"))
                       for x in grid[key]]
    else:
        maintenance = [MaintenanceRule(rule)]
    return [HeuristicRule(family["name"], plan, m)
            for plan in plans for m in maintenance]


def grid_search(rules, evaluator, num_workers=None):
    """Evaluate every rule and pick the cheapest.

    Ties go to the smaller interval, then the larger threshold.

    :param rules: Candidate rules, at least one.
    :type rules: list
    :param evaluator: Callable rule -> result exposing `total`.
    :type evaluator: callable
    :return: Best rule, its result and the full (rule, result) table.
    :rtype: tuple
    """
    rules = list(rules)
    if not rules:
        raise ValueError("grid search needs at least one rule")
    with ThreadPoolExecutor(max_workers=num_workers
                            or worker_count()) as executor:
        results = list(executor.map(evaluator, rules))
    table = list(zip(rules, results))
    best_rule, best = min(table, key=lambda item: (item[1].total,)
                          + item[0].sort_key())
    logger.info("Best %s rule %s: E[C_T] = %.4f over %d candidates"
                % (best_rule.name, best_rule.describe(), best.total,
                   len(rules)))
    return best_rule, best, table


def grid_table_rows(table):
    """CSV rows with rule parameters and the cost breakdown."""
    rows = []
    for rule, result in table:
        row = rule.describe()
        row.update({"C_I": result.breakdown["inspection"],
                    "C_R": result.breakdown["repair"],
                    "C_F": result.breakdown["failure"],
                    "C_T": result.total,
                    "CI95": result.ci})
        rows.append(row)
    return rows


def calibrate_discount(dbn, failure_cost=CALIBRATION_FAILURE_COST,
                       target=CALIBRATION_TARGET,
                       bracket=CALIBRATION_BRACKET, horizon=None):
    """Discount factor at which the no-inspection analytic cost hits
    `target`.

    :raises CalibrationError: `target` is not bracketed.
    :rtype: float
    """
    horizon = int(horizon or dbn.params.t_N)
    increments = np.diff(unroll_failure_curve(dbn)[:horizon + 1])
    years = np.arange(1, horizon + 1)

    def excess(gamma):
        return failure_cost * float(increments @ gamma ** years) - target

    low, high = bracket
    if excess(low) * excess(high) > 0:
        raise CalibrationError(
            "target cost %g is outside [%g, %g] for discount in %s"
            % (target, excess(low) + target, excess(high) + target,
               bracket))
    gamma = float(brentq(excess, low, high, xtol=1e-14))
    logger.info("Calibrated discount factor %.6f (target %g)"
                % (gamma, target))
    return gamma
