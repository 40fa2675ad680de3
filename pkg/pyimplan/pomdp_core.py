# MIT License
#
# Copyright (c) 2024 pyimplan contributors
#
# Licensed under the MIT License. See LICENSE in the project root.

"""Discrete POMDP data model, belief arithmetic and alpha-vector sets."""

from collections import namedtuple
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from pyimplan.base_utils import (ImpossibleObservationError,
                                 UninitializedPolicyError)

STOCHASTIC_TOL = 1e-9

Violation = namedtuple("Violation", ["matrix", "action", "row", "deviation",
                                     "message"])


def _frozen_array(values, dtype=float):
    array = np.array(values, dtype=dtype)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class BeliefState:
    """Probability vector over the states of a model.

    Construction does not enforce the simplex so that malformed beliefs can
    still be reported by :func:`validate`. Use :meth:`normalized` to build a
    belief from unnormalized mass.
    """

    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", _frozen_array(self.probs))

    @classmethod
    def normalized(cls, mass):
        mass = np.asarray(mass, dtype=float)
        return cls(mass / mass.sum())

    @classmethod
    def point_mass(cls, num_states, index):
        probs = np.zeros(num_states)
        probs[index] = 1.0
        return cls(probs)

    @classmethod
    def uniform(cls, num_states):
        return cls(np.full(num_states, 1.0 / num_states))

    def __len__(self):
        return self.probs.shape[0]

    def is_valid(self, tol=STOCHASTIC_TOL):
        return bool(np.all(self.probs >= 0)
                    and abs(self.probs.sum() - 1.0) <= tol)


@dataclass(frozen=True, eq=False)
class AlphaVectorSet:
    """Piecewise-linear value function: rows of `vectors` tagged by action.

    :param vectors: (K, num_states) array of alpha vectors.
    :type vectors: class:`numpy.ndarray`
    :param actions: (K,) action index of each vector.
    :type actions: class:`numpy.ndarray`
    """

    vectors: np.ndarray
    actions: np.ndarray

    def __post_init__(self):
        vectors = np.array(self.vectors, dtype=float, ndmin=2)
        actions = np.array(self.actions, dtype=np.int64).ravel()
        if vectors.shape[0] != actions.shape[0]:
            raise ValueError("Got %d vectors but %d actions"
                             % (vectors.shape[0], actions.shape[0]))
        vectors.setflags(write=False)
        actions.setflags(write=False)
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "actions", actions)

    @classmethod
    def from_pairs(cls, pairs, num_states):
        pairs = list(pairs)
        if not pairs:
            return cls(np.zeros((0, num_states)), np.zeros(0, dtype=np.int64))
        return cls(np.vstack([np.asarray(v, dtype=float) for v, _ in pairs]),
                   np.array([a for _, a in pairs], dtype=np.int64))

    def __len__(self):
        return self.vectors.shape[0]

    def __iter__(self):
        return iter(zip(self.vectors, self.actions.tolist()))


@dataclass(frozen=True, eq=False)
class DiscretePomdp:
    """The 7-tuple <S, A, O, T, Z, R, gamma> plus initial belief.

    `transition[a]` is a (S, S) CSR matrix T(s, a, s'). `observation[a]` is
    a (S, O) CSR matrix Z(o | s', a) indexed by the post-transition state.
    `reward` is a (A, S) array R(s, a).

    `state_features` carries optional per-state arrays (for instance the
    representative crack size) that belief-level rules may read. Names are
    optional labels used by the interchange format and reports.
    """

    num_states: int
    num_actions: int
    num_observations: int
    transition: Tuple[sp.csr_matrix, ...]
    observation: Tuple[sp.csr_matrix, ...]
    reward: np.ndarray
    discount: float
    initial_belief: BeliefState
    failure_states: np.ndarray = field(
        default_factory=lambda: np.zeros(0, dtype=np.int64))
    terminal_states: np.ndarray = field(
        default_factory=lambda: np.zeros(0, dtype=np.int64))
    state_names: Optional[Sequence[str]] = None
    action_names: Optional[Sequence[str]] = None
    observation_names: Optional[Sequence[str]] = None
    state_features: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        setattr_ = object.__setattr__
        setattr_(self, "transition",
                 tuple(sp.csr_matrix(m, dtype=float) for m in self.transition))
        setattr_(self, "observation",
                 tuple(sp.csr_matrix(m, dtype=float)
                       for m in self.observation))
        setattr_(self, "reward", _frozen_array(np.atleast_2d(self.reward)))
        setattr_(self, "discount", float(self.discount))
        if not isinstance(self.initial_belief, BeliefState):
            setattr_(self, "initial_belief", BeliefState(self.initial_belief))
        setattr_(self, "failure_states",
                 _frozen_array(self.failure_states, dtype=np.int64).ravel())
        setattr_(self, "terminal_states",
                 _frozen_array(self.terminal_states, dtype=np.int64).ravel())
        for name in ("state_names", "action_names", "observation_names"):
            value = getattr(self, name)
            if value is not None:
                setattr_(self, name, tuple(str(v) for v in value))
        setattr_(self, "state_features",
                 {k: _frozen_array(v) for k, v in
                  dict(self.state_features).items()})

    @cached_property
    def transition_transposed(self):
        """T_a^T in CSR form, for fast b @ T_a."""
        return tuple(m.transpose().tocsr() for m in self.transition)

    @cached_property
    def observation_dense(self):
        """Dense (S, O) observation matrices."""
        return tuple(np.asarray(m.todense()) for m in self.observation)

    @cached_property
    def failure_mask(self):
        mask = np.zeros(self.num_states, dtype=bool)
        valid = self.failure_states[(self.failure_states >= 0)
                                    & (self.failure_states < self.num_states)]
        mask[valid] = True
        return mask

    @cached_property
    def informative_actions(self):
        """False for actions whose observation rows are all identical."""
        flags = []
        for dense in self.observation_dense:
            flags.append(bool(np.any(np.abs(dense - dense[:1]) > 0)))
        return tuple(flags)

    def action_name(self, a):
        if self.action_names:
            return self.action_names[a]
        return "a%d" % a

    def observation_name(self, o):
        if self.observation_names:
            return self.observation_names[o]
        return "o%d" % o


def predict(model, probs, a):
    """Chapman-Kolmogorov push sum_s T(s, a, s') b(s)."""
    return model.transition_transposed[a] @ probs


def filter_step(transition_t, probs, likelihood):
    """One transition plus optional Bayes correction.

    Shared by the POMDP belief update and the DBN forward operation so both
    compute identical numbers.

    :param transition_t: Transposed transition matrix (CSR).
    :type transition_t: class:`scipy.sparse.csr_matrix`
    :param probs: Current belief vector.
    :type probs: class:`numpy.ndarray`
    :param likelihood: Per-state likelihood of the evidence, or None.
    :type likelihood: class:`numpy.ndarray`, optional
    :return: Unnormalized posterior, normalizer.
    :rtype: tuple
    """
    mass = transition_t @ probs
    if likelihood is not None:
        mass = mass * likelihood
    return mass, float(mass.sum())


def belief_update(model, b, a, o):
    """Bayes filter b'(s') proportional to Z(o|s',a) sum_s T(s,a,s') b(s).

    :param model: POMDP.
    :type model: class:`DiscretePomdp`
    :param b: Current belief.
    :type b: class:`BeliefState`
    :param a: Action index.
    :type a: int
    :param o: Observation index.
    :type o: int
    :raises ImpossibleObservationError: P(o | b, a) is zero.
    :return: Posterior belief and the normalizer P(o | b, a).
    :rtype: tuple
    """
    if not 0 <= a < model.num_actions:
        raise IndexError("action %d out of range" % a)
    if not 0 <= o < model.num_observations:
        raise IndexError("observation %d out of range" % o)
    likelihood = model.observation_dense[a][:, o]
    mass, normalizer = filter_step(model.transition_transposed[a],
                                   b.probs, likelihood)
    if normalizer <= 0:
        raise ImpossibleObservationError(
            "Observation %s has zero probability after action %s"
            % (model.observation_name(o), model.action_name(a)))
    posterior = mass / normalizer
    return BeliefState(posterior / posterior.sum()), normalizer


def observation_probabilities(model, b, a):
    """P(o | b, a) for every o, and the predicted state distribution."""
    predicted = predict(model, b.probs, a)
    return predicted @ model.observation_dense[a], predicted


def belief_reward(model, b, a):
    """Expected immediate reward sum_s b(s) R(s, a)."""
    return float(b.probs @ model.reward[a])


def failure_probability(model, b):
    """Mass of the failure states."""
    return float(b.probs[model.failure_mask].sum())


def value_at(alpha_set, b):
    """Lower-bound value and greedy action at belief `b`.

    Ties go to the lowest vector index.

    :raises UninitializedPolicyError: The set is empty.
    :return: (value, action index)
    :rtype: tuple
    """
    if len(alpha_set) == 0:
        raise UninitializedPolicyError("Alpha-vector set is empty; "
                                       "initialize or solve first.")
    values = alpha_set.vectors @ b.probs
    best = int(np.argmax(values))
    return float(values[best]), int(alpha_set.actions[best])


def _stochastic_violations(name, matrices, width):
    violations = []
    for a, matrix in enumerate(matrices):
        if matrix.shape[1] != width:
            violations.append(Violation(name, a, None, None,
                                        "%s[%d] has %d columns, expected %d"
                                        % (name, a, matrix.shape[1], width)))
            continue
        if matrix.nnz and matrix.data.min() < 0:
            rows = np.unique(np.repeat(np.arange(matrix.shape[0]),
                                       np.diff(matrix.indptr))[
                                           matrix.data < 0])
            for row in rows:
                violations.append(Violation(name, a, int(row), None,
                                            "negative entry in %s[%d] row %d"
                                            % (name, a, row)))
        sums = np.asarray(matrix.sum(axis=1)).ravel()
        for row in np.flatnonzero(np.abs(sums - 1.0) > STOCHASTIC_TOL):
            deviation = float(sums[row] - 1.0)
            violations.append(Violation(
                name, a, int(row), deviation,
                "%s[%d] row %d sums to %.12g (%s %.3g)"
                % (name, a, row, sums[row],
                   "deficit" if deviation < 0 else "excess", abs(deviation))))
    return violations


def validate(model):
    """Check every DiscretePomdp invariant.

    :return: Violations; empty when the model is well formed.
    :rtype: list of class:`Violation`
    """
    S, A = model.num_states, model.num_actions
    violations = []
    for name, matrices, width in (
            ("transition", model.transition, S),
            ("observation", model.observation, model.num_observations)):
        if len(matrices) != A:
            violations.append(Violation(name, None, None, None,
                                        "%d %s matrices for %d actions"
                                        % (len(matrices), name, A)))
        shaped = []
        for a, matrix in enumerate(matrices):
            if matrix.shape[0] != S:
                violations.append(Violation(name, a, None, None,
                                            "%s[%d] has %d rows, expected %d"
                                            % (name, a, matrix.shape[0], S)))
            else:
                shaped.append((a, matrix))
        for a, matrix in shaped:
            for v in _stochastic_violations(name, [matrix], width):
                violations.append(v._replace(action=a))

    if model.reward.shape != (A, S):
        violations.append(Violation("reward", None, None, None,
                                    "reward shape %s, expected %s"
                                    % (model.reward.shape, (A, S))))
    elif not np.all(np.isfinite(model.reward)):
        violations.append(Violation("reward", None, None, None,
                                    "reward has non-finite entries"))

    for name, indices in (("failure_states", model.failure_states),
                          ("terminal_states", model.terminal_states)):
        bad = indices[(indices < 0) | (indices >= S)]
        for index in bad:
            violations.append(Violation(name, None, int(index), None,
                                        "%s index %d outside [0, %d)"
                                        % (name, index, S)))

    if not 0 < model.discount <= 1:
        violations.append(Violation("discount", None, None, None,
                                    "discount %g outside (0, 1]"
                                    % model.discount))
    elif model.discount == 1 and model.terminal_states.size == 0:
        violations.append(Violation("discount", None, None, None,
                                    "discount 1 needs terminal states"))

    probs = model.initial_belief.probs
    if probs.shape != (S,):
        violations.append(Violation("initial_belief", None, None, None,
                                    "belief length %d, expected %d"
                                    % (probs.shape[0], S)))
    else:
        negative = np.flatnonzero(probs < 0)
        for row in negative:
            violations.append(Violation("initial_belief", None, int(row),
                                        float(probs[row]),
                                        "negative belief entry at %d" % row))
        if not negative.size and abs(probs.sum() - 1.0) > STOCHASTIC_TOL:
            violations.append(Violation("initial_belief", None, None,
                                        float(probs.sum() - 1.0),
                                        "initial belief sums to %.12g"
                                        % probs.sum()))
    return violations
