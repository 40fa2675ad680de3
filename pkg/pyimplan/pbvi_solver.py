# MIT License
#
# Copyright (c) 2024 pyimplan contributors
#
# Licensed under the MIT License. See LICENSE in the project root.

"""Point-based value iteration.

The lower bound is a set of alpha vectors, seeded with blind policies and
optionally with the plans of fixed policies. The upper bound is a sawtooth
interpolation over fast informed bound corners and belief points.

The default sampler descends the belief tree along the largest weighted
bound gap (heuristic-search style). The focused-depth sampler follows the
largest occupancy-weighted gap under an adaptive depth limit. The
random-reachable sampler backs up a fixed set of beliefs collected by
random exploration in randomized order.
"""

import copy
import hashlib
import time
from collections import namedtuple
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from pyimplan.base_utils import (console_logger, substream, DivergenceError,
                                 UninitializedPolicyError)
from pyimplan.constants import (SOLVER_DEFAULTS, SAMPLING_STRATEGIES,
                                POLICY_FORMAT_VERSION)
from pyimplan.pomdp_core import AlphaVectorSet, BeliefState

logger = console_logger("POMDP_SOLVER")

TracePoint = namedtuple("TracePoint", ["time", "lower", "upper"])

VALUE_ITERATION_TOL = 1e-10
MAX_VALUE_ITERATIONS = 100000
PRUNE_START = 256
FOCUSED_START_DEPTH = 10
FOCUSED_DEPTH_GROWTH = 1.1
PLAN_KEY_DECIMALS = 12


@dataclass(frozen=True)
class SolverConfig:
    """Stopping rules and sampling options of :func:`solve`.

    :param time_budget: Wall-clock seconds.
    :type time_budget: float
    :param target_gap: Stop when upper - lower at b0 drops below this.
    :type target_gap: float
    :param target_gap_relative: Same, relative to abs(lower at b0).
    :type target_gap_relative: float
    :param max_belief_points: Upper-bound point budget.
    :type max_belief_points: int
    :param sampling_strategy: "gap-driven", "focused-depth" or\
        "random-reachable".
    :type sampling_strategy: str
    :param backup_batch: Insertions between dominance pruning passes, and\
        backups between trace points in random-reachable mode.
    :type backup_batch: int
    :param prune_tolerance: Dominance and improvement tolerance.
    :type prune_tolerance: float
    :param max_trials: Optional cap on trials (iterations).
    :type max_trials: int
    """

    time_budget: float = SOLVER_DEFAULTS["time_budget"]
    target_gap: float = SOLVER_DEFAULTS["target_gap"]
    target_gap_relative: float = SOLVER_DEFAULTS["target_gap_relative"]
    max_belief_points: int = SOLVER_DEFAULTS["max_belief_points"]
    sampling_strategy: str = SOLVER_DEFAULTS["sampling_strategy"]
    backup_batch: int = SOLVER_DEFAULTS["backup_batch"]
    prune_tolerance: float = SOLVER_DEFAULTS["prune_tolerance"]
    max_trials: Optional[int] = SOLVER_DEFAULTS["max_trials"]
    max_depth: int = SOLVER_DEFAULTS["max_depth"]
    perseus_beliefs: int = SOLVER_DEFAULTS["perseus_beliefs"]
    seed: int = SOLVER_DEFAULTS["seed"]

    def __post_init__(self):
        if not self.time_budget > 0:
            raise ValueError("time_budget must be > 0")
        if self.target_gap < 0 or self.target_gap_relative < 0:
            raise ValueError("target gaps must be >= 0")
        if self.sampling_strategy not in SAMPLING_STRATEGIES:
            raise ValueError("sampling_strategy must be one of %s"
                             % SAMPLING_STRATEGIES)
        if self.backup_batch < 1 or self.max_depth < 1:
            raise ValueError("backup_batch and max_depth must be >= 1")

    @classmethod
    def from_dict(cls, options=None):
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in (options or {}).items()
                      if k in names})


def _support_range(probs):
    nonzero = np.flatnonzero(probs)
    return int(nonzero[0]), int(nonzero[-1]) + 1


class _AlphaStore(object):
    """Growable alpha-vector array; insertion order is kept for ties."""

    def __init__(self, num_states, capacity=64):
        self.vectors = np.empty((capacity, num_states))
        self.actions = np.empty(capacity, dtype=np.int64)
        self.means = np.empty(capacity)
        self.size = 0

    def add(self, vector, action):
        if self.size == self.vectors.shape[0]:
            capacity = 2 * self.vectors.shape[0]
            for name in ("vectors", "actions", "means"):
                old = getattr(self, name)
                grown = np.empty((capacity,) + old.shape[1:], old.dtype)
                grown[:self.size] = old[:self.size]
                setattr(self, name, grown)
        self.vectors[self.size] = vector
        self.actions[self.size] = action
        self.means[self.size] = vector.mean()
        self.size += 1
        return self.size - 1

    def values(self, probs, lo=None, hi=None):
        if lo is None:
            lo, hi = _support_range(probs)
        return self.vectors[:self.size, lo:hi] @ probs[lo:hi]

    def best(self, probs):
        values = self.values(probs)
        index = int(np.argmax(values))
        return float(values[index]), index

    def prune(self, candidates, tolerance):
        """Drop vectors pointwise dominated by one of `candidates`."""
        removed = np.zeros(self.size, dtype=bool)
        for j in candidates:
            if j >= self.size or removed[j]:
                continue
            others = np.flatnonzero(~removed[:self.size]
                                    & (self.means[:self.size]
                                       <= self.means[j] + tolerance))
            others = others[others != j]
            if not others.size:
                continue
            dominated = np.all(self.vectors[others]
                               <= self.vectors[j] + tolerance, axis=1)
            removed[others[dominated]] = True
        if removed.any():
            keep = np.flatnonzero(~removed)
            count = keep.size
            self.vectors[:count] = self.vectors[keep]
            self.actions[:count] = self.actions[keep]
            self.means[:count] = self.means[keep]
            self.size = count
        return int(removed.sum())

    def snapshot(self):
        return AlphaVectorSet(self.vectors[:self.size].copy(),
                              self.actions[:self.size].copy())


def _gather(starts, lengths):
    """Flat positions of the slices [start, start + length) and the offset
    of each slice in the result.
    """
    offsets = np.concatenate([[0], np.cumsum(lengths)[:-1]])
    positions = (np.repeat(starts - offsets, lengths)
                 + np.arange(int(lengths.sum())))
    return positions, offsets


class SawtoothUpperBound(object):
    """Upper bound from corner values plus interior belief points.

    U(b) = min(b . V, min_i [b . V + r_i(b) (v_i - b_i . V)]) with
    r_i(b) = min_{s in supp b_i} b(s) / b_i(s). Points are stored sparse;
    only points whose first support state carries mass are evaluated.
    Points the others already imply are pruned each time the point count
    doubles and before the `max_points` budget drops a new point.
    """

    def __init__(self, corners, tolerance=1e-9, max_points=20000):
        self.corners = np.array(corners, dtype=float)
        self.tolerance = tolerance
        self.max_points = max_points
        self._first = np.empty(64, dtype=np.int64)
        self._values = np.empty(64)
        self._delta = np.empty(64)
        self._ptr = np.zeros(65, dtype=np.int64)
        self._indices = np.empty(1024, dtype=np.int64)
        self._probs = np.empty(1024)
        self.size = 0
        self.full = False
        self._prune_at = PRUNE_START

    @staticmethod
    def _grown(array, needed):
        if needed <= array.shape[0]:
            return array
        grown = np.empty(max(needed, 2 * array.shape[0]), array.dtype)
        grown[:array.shape[0]] = array
        return grown

    def value(self, probs, exclude=None):
        """U(probs); points flagged in the boolean `exclude` are skipped."""
        corner = float(probs @ self.corners)
        if not self.size:
            return corner
        active = probs[self._first[:self.size]] > 0
        if exclude is not None:
            active &= ~exclude
        candidates = np.flatnonzero(active)
        if not candidates.size:
            return corner
        starts = self._ptr[candidates]
        positions, offsets = _gather(starts,
                                     self._ptr[candidates + 1] - starts)
        ratios = probs[self._indices[positions]] / self._probs[positions]
        scale = np.minimum.reduceat(ratios, offsets)
        return corner + min(0.0, float(np.min(scale
                                              * self._delta[candidates])))

    def point(self, i):
        """Dense belief of the i-th point."""
        probs = np.zeros(self.corners.size)
        lo, hi = self._ptr[i], self._ptr[i + 1]
        probs[self._indices[lo:hi]] = self._probs[lo:hi]
        return probs

    def _refresh_deltas(self):
        if not self.size:
            return
        nnz = self._ptr[self.size]
        weighted = self._probs[:nnz] * self.corners[self._indices[:nnz]]
        dots = np.add.reduceat(weighted, self._ptr[:self.size])
        self._delta[:self.size] = self._values[:self.size] - dots

    def prune(self):
        """Drop the points the corners and the remaining points already\
            bound; returns the number dropped.

        The bound never decreases by pruning, so it stays an upper bound.
        """
        removed = self._delta[:self.size] >= -self.tolerance
        for i in np.flatnonzero(~removed):
            removed[i] = True
            if self.value(self.point(i), exclude=removed) \
                    > self._values[i] + self.tolerance:
                removed[i] = False
        if removed.any():
            self._compact(np.flatnonzero(~removed))
        return int(removed.sum())

    def _compact(self, keep):
        starts = self._ptr[keep]
        lengths = self._ptr[keep + 1] - starts
        positions, _ = _gather(starts, lengths)
        count, nnz = keep.size, positions.size
        self._indices[:nnz] = self._indices[positions]
        self._probs[:nnz] = self._probs[positions]
        for name in ("_first", "_values", "_delta"):
            array = getattr(self, name)
            array[:count] = array[keep]
        self._ptr[0] = 0
        self._ptr[1:count + 1] = np.cumsum(lengths)
        self.size = count
        self.full = False

    def add(self, probs, value):
        """Install (probs, value); returns True when the bound tightened."""
        support = np.flatnonzero(probs)
        if support.size == 1:
            s = int(support[0])
            if value < self.corners[s] - self.tolerance:
                self.corners[s] = value
                self._refresh_deltas()
                return True
            return False
        delta = value - float(probs[support] @ self.corners[support])
        if delta >= -self.tolerance:
            return False
        if self.size >= self._prune_at \
                or (self.size >= self.max_points and not self.full):
            dropped = self.prune()
            self._prune_at = max(2 * self.size, PRUNE_START)
            logger.debug("Pruned %d upper-bound points, %d left"
                         % (dropped, self.size))
        if self.size >= self.max_points:
            if not self.full:
                logger.warning("Upper bound reached %d belief points; "
                               "further points are dropped" % self.size)
                self.full = True
            return False
        n, nnz = self.size, self._ptr[self.size]
        self._first = self._grown(self._first, n + 1)
        self._values = self._grown(self._values, n + 1)
        self._delta = self._grown(self._delta, n + 1)
        self._ptr = self._grown(self._ptr, n + 2)
        self._indices = self._grown(self._indices, nnz + support.size)
        self._probs = self._grown(self._probs, nnz + support.size)
        self._first[n] = support[0]
        self._values[n] = value
        self._delta[n] = delta
        self._indices[nnz:nnz + support.size] = support
        self._probs[nnz:nnz + support.size] = probs[support]
        self._ptr[n + 1] = nnz + support.size
        self.size += 1
        return True


class _Prepared(object):
    """Solver-side view of a model."""

    def __init__(self, model):
        self.model = model
        self.num_states = model.num_states
        self.num_actions = model.num_actions
        self.transition = model.transition
        self.transition_t = model.transition_transposed
        self.observation = model.observation_dense
        self.reward = model.reward
        self.discount = model.discount
        self.informative = model.informative_actions

    def successors(self, probs, a):
        """[(P(o | b, a), b_ao, o)] for every possible observation.

        Actions whose observation rows are all equal have a single
        successor, the prediction itself.
        """
        predicted = self.transition_t[a] @ probs
        if not self.informative[a]:
            return [(1.0, predicted, None)]
        lo, hi = _support_range(predicted)
        masses = predicted[lo:hi, None] * self.observation[a][lo:hi]
        totals = masses.sum(axis=0)
        successors = []
        for o in np.flatnonzero(totals > 0):
            child = np.zeros(self.num_states)
            child[lo:hi] = masses[:, o] / totals[o]
            successors.append((float(totals[o]), child, int(o)))
        return successors


def _value_iteration(prepared, action=None):
    """MDP values, or the values of always playing `action`."""
    model = prepared.model
    if prepared.discount >= 1.0 and model.terminal_states.size == 0:
        raise DivergenceError("discount 1 without terminal states: value "
                              "iteration does not converge")
    actions = range(prepared.num_actions) if action is None else [action]
    values = np.zeros(prepared.num_states)
    for _ in range(MAX_VALUE_ITERATIONS):
        q = np.vstack([prepared.reward[a]
                       + prepared.discount * (prepared.transition[a] @ values)
                       for a in actions])
        updated = q.max(axis=0)
        change = float(np.max(np.abs(updated - values)))
        values = updated
        if change <= VALUE_ITERATION_TOL:
            return values
    raise DivergenceError("value iteration did not converge in %d sweeps"
                          % MAX_VALUE_ITERATIONS)


def _informed_bound(prepared, start):
    """Fast informed bound max_a Q(s, a), iterated down from `start`.

    Q(s, a) = R(s, a) + gamma sum_o max_a' sum_s' T(s, a, s') Z(o | s', a)
    Q(s', a'). Starting from the MDP values every sweep stays an upper
    bound of the optimal values.
    """
    q = np.repeat(start[:, None], prepared.num_actions, axis=1)
    for _ in range(MAX_VALUE_ITERATIONS):
        updated = np.empty_like(q)
        for a in range(prepared.num_actions):
            transition = prepared.transition[a]
            if not prepared.informative[a]:
                future = (transition @ q).max(axis=1)
            else:
                z = prepared.observation[a]
                future = np.zeros(prepared.num_states)
                for o in np.flatnonzero(z.any(axis=0)):
                    future += (transition @ (z[:, o, None] * q)).max(axis=1)
            updated[:, a] = prepared.reward[a] + prepared.discount * future
        change = float(np.max(np.abs(updated - q)))
        q = updated
        if change <= VALUE_ITERATION_TOL:
            return q.max(axis=1)
    raise DivergenceError("informed bound did not converge in %d sweeps"
                          % MAX_VALUE_ITERATIONS)


class BoundPair(object):
    """Lower alpha vectors and sawtooth upper bound of one model.

    `status` is "initial" until a backup ran, "backed-up" after a manual
    :func:`backup`, and "converged", "time-budget" or "max-trials" after
    :func:`solve`.
    """

    def __init__(self, model, lower, upper, config):
        self.model = model
        self.prepared = _Prepared(model)
        self.store = lower
        self.upper = upper
        self.config = config
        self.status = "initial"
        self.trials = 0
        self.backups = 0
        self.depth_limit = FOCUSED_START_DEPTH
        self._batch = []

    @property
    def lower(self):
        return self.store.snapshot()

    def lower_value(self, probs):
        return self.store.best(np.asarray(getattr(probs, "probs", probs)))[0]

    def upper_value(self, probs):
        return self.upper.value(np.asarray(getattr(probs, "probs", probs)))

    @property
    def initial(self):
        return self.model.initial_belief.probs

    def gap(self, probs=None):
        probs = self.initial if probs is None else probs
        return self.upper_value(probs) - self.lower_value(probs)

    def target_gap(self):
        return max(self.config.target_gap,
                   self.config.target_gap_relative
                   * abs(self.lower_value(self.initial)))

    def insert(self, vector, action):
        self._batch.append(self.store.add(vector, action))
        if len(self._batch) >= self.config.backup_batch:
            self.flush()

    def flush(self):
        if self._batch:
            self.store.prune(self._batch, self.config.prune_tolerance)
            self._batch = []


def initialize_bounds(model, config=None, seeds=()):
    """Blind-policy lower bound and fast informed upper bound.

    :param seeds: Extra lower-bound vectors, e.g. from\
        :func:`policy_vectors`; pointwise dominated ones are pruned.
    :type seeds: iterable of class:`pyimplan.pomdp_core.AlphaVectorSet`
    :raises DivergenceError: discount 1 without terminal states.
    :rtype: class:`BoundPair`
    """
    config = config or SolverConfig()
    prepared = _Prepared(model)
    lower = _AlphaStore(model.num_states)
    for a in range(model.num_actions):
        lower.add(_value_iteration(prepared, a), a)
    upper = SawtoothUpperBound(
        _informed_bound(prepared, _value_iteration(prepared)),
        config.prune_tolerance, config.max_belief_points)
    bounds = BoundPair(model, lower, upper, config)
    for alpha_set in seeds:
        for vector, action in zip(alpha_set.vectors, alpha_set.actions):
            bounds.insert(np.asarray(vector, dtype=float), int(action))
    bounds.flush()
    logger.debug("Initial bounds at b0: lower %.6g, upper %.6g, %d vectors"
                 % (bounds.lower_value(bounds.initial),
                    bounds.upper_value(bounds.initial), lower.size))
    return bounds


def _plan_key(year, probs, controller):
    digest = hashlib.sha1(np.round(probs, PLAN_KEY_DECIMALS).tobytes())
    return year, digest.hexdigest(), repr(getattr(controller, "pending",
                                                  None))


def policy_vectors(model, policy, horizon, max_vectors=256):
    """Alpha vectors of the conditional plan `policy` follows from b0.

    The plan branches on every observation with positive probability and
    is evaluated for `horizon` years; from then on, and for observations
    the plan never meets, it continues with the best blind policy. Each
    node of the plan is a plan itself, so every returned vector is a valid
    lower bound. Nodes reached with the same belief and controller state
    are evaluated once.

    :param model: POMDP.
    :type model: class:`pyimplan.pomdp_core.DiscretePomdp`
    :param policy: Object exposing ``controller()``.
    :param horizon: Years the plan is followed.
    :type horizon: int
    :param max_vectors: Vectors kept, nearest to b0 first.
    :type max_vectors: int
    :rtype: class:`pyimplan.pomdp_core.AlphaVectorSet`
    """
    prepared = _Prepared(model)
    blind = np.vstack([_value_iteration(prepared, a)
                       for a in range(model.num_actions)])
    nodes = {}

    def tail(probs):
        a = int(np.argmax(blind @ probs))
        return blind[a]

    def evaluate(year, probs, controller):
        if year >= horizon:
            return tail(probs)
        key = _plan_key(year, probs, controller)
        if key in nodes:
            return nodes[key][1]
        a = int(controller.act(year, BeliefState(probs)))
        predicted = prepared.transition_t[a] @ probs
        if prepared.informative[a]:
            z = prepared.observation[a]
            future = np.zeros(prepared.num_states)
            for o in range(z.shape[1]):
                mass = predicted * z[:, o]
                total = float(mass.sum())
                if total > 0:
                    child = mass / total
                    branch = copy.copy(controller)
                    branch.observe(a, o, BeliefState(child))
                    vector = evaluate(year + 1, child, branch)
                else:
                    vector = tail(predicted)
                future += z[:, o] * vector
        else:
            branch = copy.copy(controller)
            branch.observe(a, 0, BeliefState(predicted))
            future = evaluate(year + 1, predicted, branch)
        vector = prepared.reward[a] + prepared.discount * (
            prepared.transition[a] @ future)
        nodes[key] = (year, vector, a)
        return vector

    evaluate(0, model.initial_belief.probs, policy.controller())
    kept = sorted(nodes.values(), key=lambda node: node[0])[:max_vectors]
    logger.debug("Plan of %d nodes; kept %d vectors" % (len(nodes),
                                                        len(kept)))
    return AlphaVectorSet(np.vstack([v for _, v, _ in kept]),
                          [a for _, _, a in kept])


def _lower_backup(bounds, probs):
    """Point-based Bellman backup: (value, vector, action) at `probs`."""
    prepared, store = bounds.prepared, bounds.store
    best = (-np.inf, None, None)
    for a in range(prepared.num_actions):
        predicted = prepared.transition_t[a] @ probs
        lo, hi = _support_range(predicted)
        block = store.vectors[:store.size, lo:hi]
        if prepared.informative[a]:
            z = prepared.observation[a]
            choice = np.argmax(block @ (predicted[lo:hi, None] * z[lo:hi]),
                               axis=0)
            future = (z * store.vectors[choice].T).sum(axis=1)
        else:
            future = store.vectors[int(np.argmax(block @ predicted[lo:hi]))]
        vector = prepared.reward[a] + prepared.discount * (
            prepared.transition[a] @ future)
        value = float(vector @ probs)
        if value > best[0]:
            best = (value, vector, a)
    return best


def _upper_q(bounds, probs):
    """Upper Q values and successors of every action."""
    prepared = bounds.prepared
    q = np.empty(prepared.num_actions)
    expansions = []
    for a in range(prepared.num_actions):
        successors = [(p, child, o, bounds.upper.value(child))
                      for p, child, o in prepared.successors(probs, a)]
        q[a] = float(prepared.reward[a] @ probs) + prepared.discount * sum(
            p * u for p, _, _, u in successors)
        expansions.append(successors)
    return q, expansions


def _update(bounds, probs):
    value, vector, action = _lower_backup(bounds, probs)
    current = bounds.lower_value(probs)
    if value > current + bounds.config.prune_tolerance:
        bounds.insert(vector, action)
    q, _ = _upper_q(bounds, probs)
    if q.max() < bounds.upper_value(probs) - bounds.config.prune_tolerance:
        bounds.upper.add(probs, float(q.max()))
    bounds.backups += 1


def backup(model, b, bounds):
    """Back up both bounds at belief `b` and return `bounds`.

    The lower value at `b` never decreases.
    """
    probs = np.asarray(getattr(b, "probs", b), dtype=float)
    _update(bounds, probs)
    bounds.flush()
    if bounds.status == "initial":
        bounds.status = "backed-up"
    return bounds


def _gap_trial(bounds):
    """Descend along the largest weighted gap, then back up in reverse."""
    gamma = bounds.prepared.discount
    epsilon = bounds.target_gap()
    probs = bounds.initial
    path = []
    for depth in range(bounds.config.max_depth):
        gap = bounds.upper_value(probs) - bounds.lower_value(probs)
        if gap <= epsilon * gamma ** -depth:
            break
        path.append(probs)
        q, expansions = _upper_q(bounds, probs)
        a = int(np.argmax(q))
        threshold = epsilon * gamma ** -(depth + 1)
        excess = [p * (u - bounds.lower_value(child) - threshold)
                  for p, child, _, u in expansions[a]]
        o = int(np.argmax(excess))
        if excess[o] <= 0:
            break
        probs = expansions[a][o][1]
    for probs in reversed(path):
        _update(bounds, probs)
    bounds.flush()
    return len(path)


def _focused_trial(bounds):
    """Descend along the largest occupancy-weighted gap under an adaptive\
        depth limit, then back up in reverse.

    The limit grows by FOCUSED_DEPTH_GROWTH whenever a trial reaches it
    without closing the gap at b0 by more than the target gap.
    """
    gamma = bounds.prepared.discount
    epsilon = bounds.target_gap()
    limit = min(bounds.depth_limit, bounds.config.max_depth)
    before = bounds.gap()
    probs = bounds.initial
    weight = 1.0
    path = []
    cut = True
    for _ in range(limit):
        gap = bounds.upper_value(probs) - bounds.lower_value(probs)
        if weight * gap <= epsilon:
            cut = False
            break
        path.append(probs)
        q, expansions = _upper_q(bounds, probs)
        a = int(np.argmax(q))
        scores = [p * (u - bounds.lower_value(child))
                  for p, child, _, u in expansions[a]]
        o = int(np.argmax(scores))
        if scores[o] <= 0:
            cut = False
            break
        weight *= gamma * expansions[a][o][0]
        probs = expansions[a][o][1]
    for probs in reversed(path):
        _update(bounds, probs)
    bounds.flush()
    if cut and before - bounds.gap() <= epsilon:
        bounds.depth_limit = int(np.ceil(limit * FOCUSED_DEPTH_GROWTH))
    return len(path)


TRIALS = {"gap-driven": _gap_trial, "focused-depth": _focused_trial}


def _reachable_beliefs(bounds, count, rng):
    """Beliefs met by random-action walks from b0, stored as slices."""
    prepared = bounds.prepared
    terminal = bounds.model.terminal_states
    b0 = bounds.initial
    lo, hi = _support_range(b0)
    beliefs = [(lo, b0[lo:hi].copy())]
    while len(beliefs) < count:
        probs = b0
        for _ in range(bounds.config.max_depth):
            a = int(rng.integers(prepared.num_actions))
            successors = prepared.successors(probs, a)
            weights = np.array([p for p, _, _ in successors])
            pick = int(rng.choice(len(successors), p=weights / weights.sum()))
            probs = successors[pick][1]
            lo, hi = _support_range(probs)
            beliefs.append((lo, probs[lo:hi].copy()))
            if len(beliefs) >= count or (terminal.size and
                                         probs[terminal].sum() >= 1.0 - 1e-12):
                break
    return beliefs


def _expand(belief, num_states):
    lo, values = belief
    probs = np.zeros(num_states)
    probs[lo:lo + values.size] = values
    return probs


def _random_iteration(bounds, beliefs, rng, deadline):
    """One randomized sweep; beliefs improved by earlier backups are
    skipped.
    """
    size = bounds.model.num_states
    tolerance = bounds.config.prune_tolerance
    before = np.array([bounds.lower_value(_expand(b, size))
                       for b in beliefs])
    for count, i in enumerate(rng.permutation(len(beliefs))):
        probs = _expand(beliefs[i], size)
        if bounds.lower_value(probs) > before[i] + tolerance:
            continue
        value, vector, action = _lower_backup(bounds, probs)
        if value > bounds.lower_value(probs) + tolerance:
            bounds.insert(vector, action)
        bounds.backups += 1
        if count % bounds.config.backup_batch == 0 \
                and time.perf_counter() > deadline:
            break
    bounds.flush()


def solve(model, config=None, seeds=()):
    """Anytime point-based solution of `model`.

    Stops when the gap at b0 drops below the target, the time budget runs
    out or `max_trials` trials ran. Runs ending on the gap or the trial cap
    are reproducible for a fixed seed.

    :param model: Validated POMDP.
    :type model: class:`pyimplan.pomdp_core.DiscretePomdp`
    :param config: Solver options.
    :type config: class:`SolverConfig`, optional
    :param seeds: Extra lower-bound vectors, see :func:`initialize_bounds`.
    :type seeds: iterable, optional
    :return: Bounds and the trace of (seconds, lower, upper) at b0.
    :rtype: tuple
    """
    config = config or SolverConfig()
    start = time.perf_counter()
    deadline = start + config.time_budget
    bounds = initialize_bounds(model, config, seeds)
    b0 = bounds.initial

    def record():
        trace.append(TracePoint(time.perf_counter() - start,
                                bounds.lower_value(b0),
                                bounds.upper_value(b0)))

    trace = []
    record()
    rng = substream(config.seed, 0)
    beliefs = None
    if config.sampling_strategy == "random-reachable":
        beliefs = _reachable_beliefs(bounds, config.perseus_beliefs, rng)
        logger.info("Collected %d reachable beliefs" % len(beliefs))

    while True:
        if bounds.gap() <= bounds.target_gap():
            bounds.status = "converged"
            break
        if config.max_trials is not None \
                and bounds.trials >= config.max_trials:
            bounds.status = "max-trials"
            break
        if time.perf_counter() >= deadline:
            bounds.status = ("time-budget" if bounds.trials
                             else "initial")
            break
        if beliefs is None:
            depth = TRIALS[config.sampling_strategy](bounds)
            logger.debug("Trial %d: depth %d, %d vectors, %d points"
                         % (bounds.trials, depth, bounds.store.size,
                            bounds.upper.size))
        else:
            _random_iteration(bounds, beliefs, rng, deadline)
        bounds.trials += 1
        record()

    if bounds.status == "initial":
        logger.warning("Time budget exhausted before the first backup; "
                       "returning the initial bounds")
    logger.info("Solver stopped (%s) after %d trials: lower %.6g, upper "
                "%.6g, %d vectors" % (bounds.status, bounds.trials,
                                      trace[-1].lower, trace[-1].upper,
                                      bounds.store.size))
    return bounds, trace


class AlphaVectorPolicy(object):
    """Greedy policy of an alpha-vector set; ties go to the lowest index."""

    def __init__(self, alpha_set, action_names=None):
        if len(alpha_set) == 0:
            raise UninitializedPolicyError("Alpha-vector set is empty; "
                                           "solve first.")
        self.alpha_set = alpha_set
        self.action_names = action_names

    def __call__(self, belief):
        probs = np.asarray(getattr(belief, "probs", belief), dtype=float)
        lo, hi = _support_range(probs)
        values = self.alpha_set.vectors[:, lo:hi] @ probs[lo:hi]
        return int(self.alpha_set.actions[int(np.argmax(values))])

    def controller(self):
        return self

    def act(self, year, belief):
        return self(belief)

    def observe(self, group, observation, belief):
        pass


def extract_policy(bounds):
    """Policy of the lower-bound vectors.

    :raises UninitializedPolicyError: No vectors.
    :rtype: class:`AlphaVectorPolicy`
    """
    alpha_set = bounds.lower if isinstance(bounds, BoundPair) else bounds
    names = (bounds.model.action_names if isinstance(bounds, BoundPair)
             else None)
    return AlphaVectorPolicy(alpha_set, names)


def save_policy(policy, path):
    """Write the alpha vectors of `policy` to a versioned .npz file."""
    alpha_set = getattr(policy, "alpha_set", policy)
    names = getattr(policy, "action_names", None) or ()
    np.savez_compressed(path, format_version=POLICY_FORMAT_VERSION,
                        vectors=alpha_set.vectors, actions=alpha_set.actions,
                        action_names=np.array(list(names), dtype=str))
    return path


def load_policy(path):
    with np.load(path, allow_pickle=False) as data:
        version = int(data["format_version"])
        if version != POLICY_FORMAT_VERSION:
            raise ValueError("Unsupported policy file version %d" % version)
        alpha_set = AlphaVectorSet(data["vectors"], data["actions"])
        names = [str(n) for n in data["action_names"]] or None
    return AlphaVectorPolicy(alpha_set, names)


def trace_rows(trace):
    """CSV rows of the anytime trace; costs are the negated values."""
    return [{"time": point.time, "lower": point.lower, "upper": point.upper,
             "cost_upper": -point.lower, "cost_lower": -point.upper}
            for point in trace]

