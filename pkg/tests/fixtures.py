"""Small models shared by the test modules."""

import os

import numpy as np
import scipy.sparse as sp

from pyimplan.constants import INSPECTION_PRESETS, TRADITIONAL_GROUPS
from pyimplan.discretization_dbn import build_scheme, compile_transition
from pyimplan.fatigue_model import CrackGrowthParams
from pyimplan.im_builder import CostSpec, make_groups
from pyimplan.pomdp_core import BeliefState, DiscretePomdp

SLOW = os.environ.get("PYIMPLAN_SLOW_TESTS") == "1"

SHORT_LIFE = {"t_N": 5}

TOY_COSTS = {"inspection": {"I": 1.0},
             "repair": {"perfect-repair": 10.0},
             "failure": 100.0,
             "discount": 0.95}


def listen_or_reset(discount=0.9):
    """2 states, 2 actions, 2 observations.

    Action 0 keeps the state and observes it with accuracy 0.85; action 1
    pays off in state 0, is costly in state 1 and resets to uniform without
    information.
    """
    transition = (sp.identity(2, format="csr"),
                  sp.csr_matrix(np.full((2, 2), 0.5)))
    observation = (sp.csr_matrix(np.array([[0.85, 0.15], [0.15, 0.85]])),
                   sp.csr_matrix(np.full((2, 2), 0.5)))
    reward = np.array([[-1.0, -1.0], [10.0, -20.0]])
    return DiscretePomdp(2, 2, 2, transition, observation, reward, discount,
                         BeliefState(np.array([0.5, 0.5])),
                         failure_states=[1],
                         state_names=["good", "bad"],
                         action_names=["listen", "reset"])


def random_pomdp(rng, num_states=5, num_actions=3, num_observations=3,
                 discount=0.9):
    """Dense random model with strictly positive rows."""
    def stochastic(rows, cols):
        mass = rng.random((rows, cols)) + 0.05
        return mass / mass.sum(axis=1, keepdims=True)

    transition = tuple(sp.csr_matrix(stochastic(num_states, num_states))
                       for _ in range(num_actions))
    observation = tuple(sp.csr_matrix(stochastic(num_states,
                                                 num_observations))
                        for _ in range(num_actions))
    reward = rng.normal(size=(num_actions, num_states))
    initial = rng.random(num_states)
    return DiscretePomdp(num_states, num_actions, num_observations,
                         transition, observation, reward, discount,
                         BeliefState(initial / initial.sum()))


def random_belief(rng, num_states):
    mass = rng.random(num_states)
    return BeliefState(mass / mass.sum())


def short_params():
    return CrackGrowthParams.from_dict(SHORT_LIFE)


def small_rate_dbn(num_d=6, samples_per_cell=300, seed=1):
    params = short_params()
    scheme = build_scheme("deterioration-rate", {"num_d": num_d}, params,
                          name="DR_small")
    return compile_transition(scheme, params, samples_per_cell, seed=seed,
                              num_workers=1)


def small_parametric_dbn(num_d=6, num_k=4, samples_per_cell=200, seed=1):
    params = short_params()
    scheme = build_scheme("parametric", {"num_d": num_d, "num_k": num_k},
                          params, name="PAR_small")
    return compile_transition(scheme, params, samples_per_cell, seed=seed,
                              num_workers=1)


def toy_costs():
    return CostSpec.from_dict(TOY_COSTS)


def traditional_groups(costs=None):
    return make_groups(TRADITIONAL_GROUPS, INSPECTION_PRESETS,
                       costs or toy_costs())
