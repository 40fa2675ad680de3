# MIT License
#
# Copyright (c) 2024 pyimplan contributors
#
# Licensed under the MIT License. See LICENSE in the project root.

"""Monte Carlo evaluation of I&M policies on a discrete POMDP.

A policy is any object with a ``controller()`` method returning a
per-episode controller with ``act(year, belief) -> group index`` and
``observe(group, observation, belief)``. Both POMDP alpha-vector policies
and heuristic rules plug into the same engine.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List

import numpy as np

from pyimplan.base_utils import (console_logger, worker_count, substream,
                                 InvalidPolicyActionError)
from pyimplan.constants import FAILURE_ACCRUAL_MODES
from pyimplan.pomdp_core import belief_update, failure_probability

logger = console_logger("POLICY_EVAL")

# Episodes are handed to workers in blocks of this size.
EPISODE_BLOCK = 250

Z_95 = 1.96


@dataclass
class EpisodeTrace:
    """One policy realization.

    `failure_probability` and `states` cover years 0..horizon; the
    per-year action, observation and cost lists cover the decisions taken
    at years 0..horizon - 1. Cost terms are discounted.
    """

    episode: int
    failure_probability: List[float] = field(default_factory=list)
    states: List[int] = field(default_factory=list)
    actions: List[int] = field(default_factory=list)
    observations: List[int] = field(default_factory=list)
    inspection_costs: List[float] = field(default_factory=list)
    repair_costs: List[float] = field(default_factory=list)
    failure_costs: List[float] = field(default_factory=list)

    @property
    def years(self):
        return list(range(len(self.failure_probability)))

    @property
    def costs(self):
        return [i + r + f for i, r, f in zip(self.inspection_costs,
                                             self.repair_costs,
                                             self.failure_costs)]

    @property
    def total(self):
        return float(sum(self.costs))


@dataclass(frozen=True)
class EvaluationResult:
    """Estimator of the expected total cost E[C_T] and its 95% interval."""

    mean: float
    ci: float
    std: float
    episode_costs: np.ndarray
    breakdown: dict
    histogram: np.ndarray
    traces: tuple = ()

    @property
    def num_episodes(self):
        return int(self.episode_costs.shape[0])

    @property
    def total(self):
        return self.mean


def _sample(probs, rng):
    cumulative = np.cumsum(probs)
    index = int(np.searchsorted(cumulative, rng.random() * cumulative[-1],
                                side="right"))
    return min(index, len(probs) - 1)


def _next_state(matrix, s, rng):
    start, end = matrix.indptr[s], matrix.indptr[s + 1]
    return int(matrix.indices[start + _sample(matrix.data[start:end], rng)])


def _direct_costs(model, groups):
    inspection = np.zeros(model.num_actions)
    repair = np.zeros(model.num_actions)
    if groups is not None:
        inspection[:] = [g.inspection_cost for g in groups]
        repair[:] = [g.repair_cost for g in groups]
    return inspection, repair


def run_episode(model, policy, horizon, seed, episode, groups=None,
                failure_cost=None, failure_accrual="belief"):
    """Simulate one episode and return its trace.

    Belief accrual bills the expected one-year reward of the filtered
    belief, so the failure term is the annual risk Delta P_F * C_f. Sampled
    accrual bills C_f when the ground truth newly enters a failure state.

    :raises InvalidPolicyActionError: The policy picked an unknown group.
    """
    rng = substream(seed, episode)
    gamma = model.discount
    inspection, repair = _direct_costs(model, groups)
    controller = policy.controller()

    belief = model.initial_belief
    state = _sample(belief.probs, rng)
    trace = EpisodeTrace(episode)
    trace.failure_probability.append(failure_probability(model, belief))
    trace.states.append(state)
    for year in range(horizon):
        action = controller.act(year, belief)
        if not 0 <= int(action) < model.num_actions:
            raise InvalidPolicyActionError(
                "episode %d, year %d: policy returned group %r, expected "
                "0..%d" % (episode, year, action, model.num_actions - 1))
        action = int(action)
        next_state = _next_state(model.transition[action], state, rng)
        observation = _sample(model.observation_dense[action][next_state],
                              rng)

        discount = gamma ** (year + 1)
        inspect_cost = discount * inspection[action]
        repair_cost = discount * repair[action]
        if failure_accrual == "belief":
            expected = -(gamma ** year) * float(belief.probs
                                                @ model.reward[action])
            failure = expected - inspect_cost - repair_cost
        else:
            newly_failed = (model.failure_mask[next_state]
                            and not model.failure_mask[state])
            failure = discount * failure_cost if newly_failed else 0.0

        belief, _ = belief_update(model, belief, action, observation)
        controller.observe(action, observation, belief)
        state = next_state

        trace.actions.append(action)
        trace.observations.append(observation)
        trace.inspection_costs.append(inspect_cost)
        trace.repair_costs.append(repair_cost)
        trace.failure_costs.append(failure)
        trace.failure_probability.append(failure_probability(model, belief))
        trace.states.append(state)
    return trace


def simulate_policy(model, policy, num_episodes, horizon, seed=0,
                    groups=None, failure_cost=None,
                    failure_accrual="belief", max_traces=10,
                    num_workers=None):
    """Expected total cost of `policy` by simulation.

    Episode i draws from substream (seed, i), so estimates do not depend on
    the number of workers.

    :param model: POMDP the policy acts on.
    :type model: class:`pyimplan.pomdp_core.DiscretePomdp`
    :param policy: Object exposing ``controller()``.
    :param num_episodes: Number of episodes, >= 2.
    :type num_episodes: int
    :param horizon: Years per episode, >= 1.
    :type horizon: int
    :param groups: Action-observation groups of `model`, used to split the\
        cost into inspection, repair and failure terms.
    :type groups: list, optional
    :param failure_cost: C_f, required for sampled accrual.
    :type failure_cost: float, optional
    :param failure_accrual: "belief" or "sampled", defaults to "belief".
    :type failure_accrual: str, optional
    :param max_traces: Number of full traces kept, defaults to 10.
    :type max_traces: int, optional
    :return: Mean cost, 95% interval half-width, breakdown and histogram.
    :rtype: class:`EvaluationResult`
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if num_episodes < 2:
        raise ValueError("num_episodes must be >= 2")
    if failure_accrual not in FAILURE_ACCRUAL_MODES:
        raise ValueError("failure_accrual must be one of %s"
                         % FAILURE_ACCRUAL_MODES)
    if failure_accrual == "sampled" and (failure_cost is None
                                         or groups is None):
        raise ValueError("sampled failure accrual needs groups and "
                         "failure_cost")
    num_workers = num_workers or worker_count()

    def run_block(start):
        stop = min(start + EPISODE_BLOCK, num_episodes)
        return [run_episode(model, policy, horizon, seed, i, groups,
                            failure_cost, failure_accrual)
                for i in range(start, stop)]

    starts = range(0, num_episodes, EPISODE_BLOCK)
    with ThreadPoolExecutor(max_workers=num_workers) as executor:
        blocks = list(executor.map(run_block, starts))
    traces = [trace for block in blocks for trace in block]

    totals = np.array([trace.total for trace in traces])
    histogram = np.zeros((horizon, model.num_actions), dtype=np.int64)
    for trace in traces:
        histogram[np.arange(horizon), trace.actions] += 1
    breakdown = {
        "inspection": float(np.mean([sum(t.inspection_costs)
                                     for t in traces])),
        "repair": float(np.mean([sum(t.repair_costs) for t in traces])),
        "failure": float(np.mean([sum(t.failure_costs) for t in traces]))
    }
    std = float(totals.std(ddof=1))
    result = EvaluationResult(
        mean=float(totals.mean()),
        ci=Z_95 * std / np.sqrt(num_episodes),
        std=std, episode_costs=totals, breakdown=breakdown,
        histogram=histogram, traces=tuple(traces[:max_traces]))
    logger.info("Simulated %d episodes: E[C_T] = %.4f (+/- %.4f)"
                % (num_episodes, result.mean, result.ci))
    return result


def realization_report(trace, model):
    """Plot-ready series of one realization.

    :return: "years" and "failure_probability" over years 0..horizon;
        "actions" per decision year; "detections", the years whose
        inspection reported damage.
    :rtype: dict
    """
    detections = [year + 1 for year, (action, observation) in
                  enumerate(zip(trace.actions, trace.observations))
                  if model.informative_actions[action] and observation > 0]
    return {
        "years": trace.years,
        "failure_probability": list(trace.failure_probability),
        "actions": [model.action_name(a) for a in trace.actions],
        "detections": detections
    }


def histogram_rows(result, model):
    """CSV rows: one per year with the count of every group."""
    rows = []
    for year, counts in enumerate(result.histogram):
        row = {"year": year}
        for a, count in enumerate(counts):
            row[model.action_name(a)] = int(count)
        rows.append(row)
    return rows


def trace_rows(traces, model):
    """CSV rows of every kept realization, one row per year."""
    rows = []
    for trace in traces:
        report = realization_report(trace, model)
        for year in trace.years:
            decided = year < len(trace.actions)
            rows.append({
                "episode": trace.episode,
                "year": year,
                "failure_probability": report["failure_probability"][year],
                "action": report["actions"][year] if decided else "",
                "observation": trace.observations[year] if decided else "",
                "detection": int(year in report["detections"]),
                "cost": trace.costs[year] if decided else 0.0
            })
    return rows


def cost_row(name, result, reference=None):
    """One cost-table row; `result` exposes total, ci and breakdown.

    `reference` is the E[C_T] the delta is taken against.
    """
    row = {"method": name, "E[C_T]": result.total, "CI95": result.ci,
           "C_I": result.breakdown.get("inspection"),
           "C_R": result.breakdown.get("repair"),
           "C_F": result.breakdown.get("failure")}
    if reference:
        row["delta_pct"] = 100.0 * (result.total - reference) / reference
    return row
