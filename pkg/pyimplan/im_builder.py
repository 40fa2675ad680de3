# MIT License
#
# Copyright (c) 2024 pyimplan contributors
#
# Licensed under the MIT License. See LICENSE in the project root.

"""Assemble inspection and maintenance POMDPs from a compiled DBN."""

from dataclasses import dataclass, field, replace
from typing import Mapping, Optional

import numpy as np
import scipy.sparse as sp

from pyimplan.base_utils import (console_logger, StateBudgetError,
                                 UnsupportedActionError)
from pyimplan.constants import MAINTENANCE_TYPES
from pyimplan.discretization_dbn import PARAMETRIC, likelihood_matrix
from pyimplan.fatigue_model import make_curve, num_outcomes
from pyimplan.pomdp_core import BeliefState, DiscretePomdp

logger = console_logger("IM_BUILDER")


@dataclass(frozen=True)
class CostSpec:
    """Inspection, repair and failure costs plus the yearly discount.

    :param inspection: Cost per inspection name, e.g. {"I": 5}.
    :type inspection: dict
    :param repair: Cost per repair type, e.g. {"perfect-repair": 100}.
    :type repair: dict
    :param failure: Failure cost C_f.
    :type failure: float
    :param discount: Yearly discount factor in (0, 1].
    :type discount: float
    """

    inspection: Mapping[str, float] = field(default_factory=dict)
    repair: Mapping[str, float] = field(default_factory=dict)
    failure: float = 0.0
    discount: float = 0.95

    def __post_init__(self):
        for kind in ("inspection", "repair"):
            costs = {str(k): float(v) for k, v in getattr(self, kind).items()}
            if any(v < 0 for v in costs.values()):
                raise ValueError("%s costs must be >= 0" % kind)
            object.__setattr__(self, kind, costs)
        if float(self.failure) < 0:
            raise ValueError("failure cost must be >= 0")
        if not 0 < float(self.discount) <= 1:
            raise ValueError("discount must lie in (0, 1], got %s"
                             % self.discount)
        object.__setattr__(self, "failure", float(self.failure))
        object.__setattr__(self, "discount", float(self.discount))

    @classmethod
    def from_dict(cls, costs):
        return cls(inspection=costs.get("inspection", {}),
                   repair=costs.get("repair", {}),
                   failure=costs.get("failure", 0.0),
                   discount=costs.get("discount", 0.95))

    def with_discount(self, discount):
        return replace(self, discount=discount)


@dataclass(frozen=True)
class ActionObservationGroup:
    """One maintenance action paired with an optional inspection."""

    name: str
    maintenance: str = "do-nothing"
    inspection: Optional[str] = None
    curve: Optional[object] = None
    inspection_cost: float = 0.0
    repair_cost: float = 0.0

    def __post_init__(self):
        if self.maintenance not in MAINTENANCE_TYPES:
            raise ValueError("Unknown maintenance type - %s"
                             % self.maintenance)
        if self.inspection_cost < 0 or self.repair_cost < 0:
            raise ValueError("group costs must be >= 0")
        if self.inspection is not None and self.curve is None:
            raise ValueError("group %s names inspection %s without a curve"
                             % (self.name, self.inspection))

    @property
    def observes(self):
        return self.curve is not None

    @property
    def num_outcomes(self):
        return num_outcomes(self.curve) if self.observes else 1

    @property
    def cost(self):
        """Direct cost of taking the group once."""
        return self.inspection_cost + self.repair_cost


def make_groups(definitions, inspections, costs):
    """Resolve config group entries into ActionObservationGroups.

    :param definitions: Entries like {"name": "DN-I", "maintenance":\
        "do-nothing", "inspection": "I"}.
    :type definitions: list
    :param inspections: Inspection name to curve or curve definition.
    :type inspections: dict
    :param costs: Cost table.
    :type costs: class:`CostSpec`
    :raises KeyError: Unknown inspection or missing cost.
    :rtype: list
    """
    groups = []
    for entry in definitions:
        inspection = entry.get("inspection")
        curve = None
        inspection_cost = 0.0
        if inspection is not None:
            curve = inspections[inspection]
            if isinstance(curve, dict):
                curve = make_curve(curve)
            inspection_cost = costs.inspection[inspection]
        maintenance = entry.get("maintenance", "do-nothing")
        repair_cost = (0.0 if maintenance == "do-nothing"
                       else costs.repair[maintenance])
        groups.append(ActionObservationGroup(
            entry["name"], maintenance, inspection, curve,
            inspection_cost, repair_cost))
    return groups


def perfect_repair_matrix(initial_belief, absorbing=()):
    """Transition that sends every state to the initial belief.

    Rows listed in `absorbing` keep their state instead.

    :param initial_belief: b0.
    :type initial_belief: class:`pyimplan.pomdp_core.BeliefState` or array
    :param absorbing: States the repair leaves in place.
    :type absorbing: list, optional
    :rtype: class:`scipy.sparse.csr_matrix`
    """
    b0 = np.asarray(getattr(initial_belief, "probs", initial_belief),
                    dtype=float)
    size = b0.shape[0]
    keep = np.zeros(size, dtype=bool)
    keep[np.asarray(absorbing, dtype=np.int64)] = True
    reset_rows = np.flatnonzero(~keep)
    support = np.flatnonzero(b0)
    rows = np.concatenate([np.repeat(reset_rows, support.size),
                           np.flatnonzero(keep)])
    cols = np.concatenate([np.tile(support, reset_rows.size),
                           np.flatnonzero(keep)])
    vals = np.concatenate([np.tile(b0[support], reset_rows.size),
                           np.ones(int(keep.sum()))])
    return sp.csr_matrix((vals, (rows, cols)), shape=(size, size))


def minor_repair_matrix(dbn):
    """Move every intact state two deterioration rates back.

    (d, tau) goes to (d, max(tau - 2, 0)); failure cells stay where they are.

    :raises UnsupportedActionError: `dbn` is a parametric model.
    :rtype: class:`scipy.sparse.csr_matrix`
    """
    if dbn.variant == PARAMETRIC:
        raise UnsupportedActionError("minor repair needs a deterioration-rate "
                                     "model")
    rate = dbn.block_of_state
    target = np.maximum(rate - 2, 0) * dbn.scheme.num_d + dbn.d_cell_of_state
    target = np.where(dbn.failure_mask, np.arange(dbn.num_states), target)
    size = dbn.num_states
    return sp.csr_matrix((np.ones(size), (np.arange(size), target)),
                         shape=(size, size))


def group_transition(dbn, group, repair_failed=False):
    if group.maintenance == "perfect-repair":
        absorbing = () if repair_failed else dbn.failure_states
        return perfect_repair_matrix(dbn.initial_belief, absorbing)
    if group.maintenance == "minor-repair":
        return minor_repair_matrix(dbn)
    return dbn.transition


def build_rewards(dbn, groups, costs, repair_failed=False):
    """Annual cost vectors R(s, a), undiscounted.

    The risk term is T_a R_bar - R_bar with R_bar = -C_f on failure states,
    so already failed absorbing states carry no further risk. Inspection
    and repair costs are subtracted on top.

    :return: (num_groups, num_states) array.
    :rtype: class:`numpy.ndarray`
    """
    r_bar = np.where(dbn.failure_mask, -costs.failure, 0.0)
    rewards = np.empty((len(groups), dbn.num_states))
    for a, group in enumerate(groups):
        transition = group_transition(dbn, group, repair_failed)
        rewards[a] = transition @ r_bar - r_bar - group.cost
    return rewards


def _observation_block(dbn, group, width):
    if not group.observes:
        return np.full((dbn.num_states, width), 1.0 / width)
    table = likelihood_matrix(dbn, group.curve)
    return np.hstack([table, np.zeros((dbn.num_states,
                                       width - table.shape[1]))])


def _features(dbn):
    name = "k_cell" if dbn.variant == PARAMETRIC else "rate"
    return {"damage": dbn.damage, name: dbn.block_of_state.astype(float)}


def _state_names(dbn):
    label = "k" if dbn.variant == PARAMETRIC else "tau"
    return ["d%d-%s%d" % (d, label, b) for b, d in
            zip(dbn.block_of_state, dbn.d_cell_of_state)]


def _check_groups(dbn, groups):
    if not groups:
        raise ValueError("at least one action-observation group is needed")
    for group in groups:
        if group.maintenance == "minor-repair" and dbn.variant == PARAMETRIC:
            raise UnsupportedActionError(
                "group %s uses minor repair on a parametric model"
                % group.name)


def assemble_infinite(dbn, groups, costs, repair_failed=False):
    """Stationary POMDP with one action per group.

    No-observation groups get uniform observation rows over the shared
    observation space. Rewards are the annual costs of
    :func:`build_rewards` billed at the end of the year, i.e. times gamma.

    :param dbn: Compiled deterioration model.
    :type dbn: class:`pyimplan.discretization_dbn.CompiledDbn`
    :param groups: Action-observation groups.
    :type groups: list
    :param costs: Cost table.
    :type costs: class:`CostSpec`
    :param repair_failed: Let perfect repair reset failed states, defaults\
        to False.
    :type repair_failed: bool, optional
    :rtype: class:`pyimplan.pomdp_core.DiscretePomdp`
    """
    _check_groups(dbn, groups)
    width = max(g.num_outcomes for g in groups)
    transitions = [group_transition(dbn, g, repair_failed) for g in groups]
    observations = [sp.csr_matrix(_observation_block(dbn, g, width))
                    for g in groups]
    rewards = build_rewards(dbn, groups, costs, repair_failed)
    model = DiscretePomdp(
        dbn.num_states, len(groups), width, tuple(transitions),
        tuple(observations), rewards * costs.discount, costs.discount,
        BeliefState(dbn.initial_belief), failure_states=dbn.failure_states,
        state_names=_state_names(dbn),
        action_names=[g.name for g in groups],
        observation_names=["o%d" % o for o in range(width)],
        state_features=_features(dbn))
    logger.info("Assembled infinite-horizon POMDP: %d states, %d groups, "
                "%d observations" % (model.num_states, model.num_actions,
                                     model.num_observations))
    return model


def _step_widths(dbn, horizon):
    if dbn.variant == PARAMETRIC:
        return np.full(horizon + 1, dbn.num_states, dtype=np.int64)
    steps = np.arange(horizon + 1)
    rates = np.minimum(steps + 1, dbn.scheme.tau_count)
    return rates * dbn.scheme.num_d


def augmented_state_count(dbn, horizon):
    """States of the finite-horizon layout, terminal state excluded.

    Deterioration-rate models only carry the rates reachable by step t,
    giving (t_N + 1)(t_N + 2)/2 |S_d| states; parametric models repeat all
    |S| states per step.
    """
    return int(_step_widths(dbn, int(horizon)).sum())


def assemble_finite(dbn, groups, costs, horizon=None, max_states=None,
                    repair_failed=False):
    """Augment the state with the time step for a finite horizon.

    Step t < horizon follows the stationary model into step t + 1; every
    step-horizon state moves to one absorbing terminal state with zero
    reward.

    :param horizon: Number of decision years, defaults to t_N.
    :type horizon: int, optional
    :param max_states: State budget including the terminal state.
    :type max_states: int, optional
    :raises StateBudgetError: The layout exceeds `max_states`.
    :rtype: class:`pyimplan.pomdp_core.DiscretePomdp`
    """
    _check_groups(dbn, groups)
    horizon = int(dbn.params.t_N if horizon is None else horizon)
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    widths = _step_widths(dbn, horizon)
    offsets = np.concatenate([[0], np.cumsum(widths)])
    terminal = int(offsets[-1])
    size = terminal + 1
    if max_states is not None and size > max_states:
        raise StateBudgetError(size, int(max_states))

    width = max(g.num_outcomes for g in groups)
    under_rewards = build_rewards(dbn, groups, costs, repair_failed)
    step_of = np.repeat(np.arange(horizon + 1), widths)
    under_of = np.concatenate([np.arange(w) for w in widths])

    transitions, observations = [], []
    rewards = np.zeros((len(groups), size))
    for a, group in enumerate(groups):
        under = group_transition(dbn, group, repair_failed).tocsr()
        rows, cols, vals = [], [], []
        for t in range(horizon):
            block = under[:widths[t]].tocoo()
            if block.nnz and block.col.max() >= widths[t + 1]:
                raise ValueError("transition leaves the reachable layout at "
                                 "step %d" % t)
            rows.append(block.row + offsets[t])
            cols.append(block.col + offsets[t + 1])
            vals.append(block.data)
        last = np.arange(offsets[horizon], size)
        rows.append(last)
        cols.append(np.full(last.size, terminal))
        vals.append(np.ones(last.size))
        transitions.append(sp.csr_matrix(
            (np.concatenate(vals),
             (np.concatenate(rows), np.concatenate(cols))),
            shape=(size, size)))

        z_under = _observation_block(dbn, group, width)
        z = np.vstack([z_under[under_of], np.full((1, width), 1.0 / width)])
        observations.append(sp.csr_matrix(z))

        live = step_of < horizon
        rewards[a, :terminal] = np.where(live, under_rewards[a, under_of],
                                         0.0)
    rewards *= costs.discount

    initial = np.zeros(size)
    initial[:widths[0]] = dbn.initial_belief[:widths[0]]
    failure = np.flatnonzero(dbn.failure_mask[under_of])
    features = {name: np.append(values[under_of], 0.0)
                for name, values in _features(dbn).items()}
    features["step"] = np.append(step_of, horizon + 1).astype(float)
    names = ["t%d-%s" % (t, n) for t, n in
             zip(step_of, np.asarray(_state_names(dbn))[under_of])]
    model = DiscretePomdp(
        size, len(groups), width, tuple(transitions), tuple(observations),
        rewards, costs.discount, BeliefState(initial),
        failure_states=failure, terminal_states=[terminal],
        state_names=names + ["terminal"],
        action_names=[g.name for g in groups],
        observation_names=["o%d" % o for o in range(width)],
        state_features=features)
    logger.info("Assembled finite-horizon POMDP: %d states over %d steps "
                "(%d groups)" % (size, horizon, len(groups)))
    return model
