# MIT License
#
# Copyright (c) 2024 pyimplan contributors
#
# Licensed under the MIT License. See LICENSE in the project root.

"""End-to-end experiment pipelines.

Cost comparison experiments solve the finite- and infinite-horizon POMDPs,
simulate both policies, optimize every heuristic family and write one cost
table with the relative difference of each method to the finite-horizon
POMDP. Optional rows solve the infinite-horizon POMDP of other
discretization schemes (`compare_schemes`) and the finite-horizon POMDP
with the focused-depth and random-reachable samplers. Experiments that
list several `schemes` produce the discretization accuracy report instead.
"""

from collections import namedtuple

from pyimplan.policy_eval import cost_row
from pyimplan.rbi_heuristics import HeuristicPolicy
from pyimplan.workflows.workflows_utils import dict_to_yaml

BoundCost = namedtuple("BoundCost", ["total", "ci", "breakdown"])


def bound_cost(bounds):
    """Expected cost read off the lower bound at b0."""
    return BoundCost(-bounds.lower_value(bounds.initial), 0.0, {})


def _label(rule):
    plan = rule.plan
    if plan.kind == "equidistant":
        return "%s (interval %d)" % (rule.name, plan.interval)
    if plan.kind == "threshold":
        return "%s (threshold %g)" % (rule.name, plan.threshold)
    return rule.name


def compare_methods(session):
    """Cost table of POMDP policies and optimized heuristics.

    :param session: Experiment session.
    :type session: class:`pyimplan.base.ImPlanningBase`
    :return: Cost rows; delta_pct is taken against the finite-horizon\
        POMDP bound.
    :rtype: list
    """
    config = session.experiment_info
    logger = session.logger
    entries = []

    finite_bounds, _ = session.solve(finite=True)
    reference = bound_cost(finite_bounds)
    entries.append(("POMDP-FH", reference))
    policy = session.policy(finite=True)
    entries.append(("POMDP-FH SIM",
                    session.simulate(policy, finite=True, tag="pomdp-fh")))

    infinite_bounds, _ = session.solve(finite=False)
    entries.append(("POMDP-IH", bound_cost(infinite_bounds)))
    policy = session.policy(finite=False)
    entries.append(("POMDP-IH SIM %d years" % session.horizon,
                    session.simulate(policy, finite=False, tag="pomdp-ih")))

    for scheme in config.get("compare_schemes", []):
        bounds, _ = session.solve(finite=False, scheme=scheme)
        entries.append(("POMDP-IH (%s)" % scheme, bound_cost(bounds)))
        policy = session.policy(finite=False, scheme=scheme)
        entries.append(("POMDP-IH (%s) SIM %d years"
                        % (scheme, session.horizon),
                        session.simulate(policy, finite=False,
                                         tag="pomdp-ih-%s" % scheme,
                                         scheme=scheme)))

    if config.get("compare_focused"):
        focused_bounds, _ = session.solve(
            finite=True, config={"sampling_strategy": "focused-depth"})
        entries.append(("FOCUSED-FH", bound_cost(focused_bounds)))

    if config.get("compare_perseus"):
        random_bounds, _ = session.solve(
            finite=True, config={"sampling_strategy": "random-reachable"})
        entries.append(("PERSEUS-FH", bound_cost(random_bounds)))

    if config["heuristics"].get("families"):
        for family, (rule, result) in session.heuristics().items():
            entries.append((_label(rule), result))
            simulated = session.simulate(
                _rule_policy(session, rule), finite=False,
                tag="heuristic-%s" % family)
            entries.append(("%s SIM" % _label(rule), simulated))

    rows = [cost_row(name, result, reference.total)
            for name, result in entries]
    session.write_rows("costs.csv", rows)
    for row in rows:
        logger.info("%-32s E[C_T] = %10.4f (+/- %.4f) delta %+.1f%%"
                    % (row["method"], row["E[C_T]"], row["CI95"],
                       row.get("delta_pct", 0.0)))
    return rows


def _rule_policy(session, rule):
    return HeuristicPolicy(session.model(), session.groups, rule,
                           session.horizon)


def reproduce_experiment(session):
    """Run the pipeline matching the configured experiment.

    :param session: Experiment session.
    :type session: class:`pyimplan.base.ImPlanningBase`
    :return: The rows of the written report.
    :rtype: list
    """
    config = session.experiment_info
    if config.get("schemes"):
        return session.discretize()
    costs = session.costs
    session.logger.info("Experiment %s: discount %.6f, C_f %g"
                        % (session.name, costs.discount, costs.failure))
    dict_to_yaml(session.artifact("experiment.yaml"),
                 {"experiment": session.name, "discount": costs.discount,
                  "failure_cost": costs.failure,
                  "horizon": session.horizon}, session.logger)
    return compare_methods(session)
