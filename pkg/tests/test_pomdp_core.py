import unittest

import numpy as np
import scipy.sparse as sp

from pyimplan.base_utils import (ImpossibleObservationError,
                                 UninitializedPolicyError)
from pyimplan.pomdp_core import (AlphaVectorSet, BeliefState, DiscretePomdp,
                                 belief_update, belief_reward,
                                 failure_probability,
                                 observation_probabilities, validate,
                                 value_at)
from tests.fixtures import listen_or_reset, random_belief, random_pomdp


class TestBeliefUpdate(unittest.TestCase):
    def setUp(self):
        self.rng = np.random.default_rng(7)

    def test_posterior_stays_on_simplex(self):
        for _ in range(50):
            model = random_pomdp(self.rng)
            b = random_belief(self.rng, model.num_states)
            a = int(self.rng.integers(model.num_actions))
            o = int(self.rng.integers(model.num_observations))
            posterior, normalizer = belief_update(model, b, a, o)
            self.assertTrue(posterior.is_valid(1e-12))
            self.assertGreater(normalizer, 0.0)

    def test_normalizers_sum_to_one(self):
        model = random_pomdp(self.rng)
        b = random_belief(self.rng, model.num_states)
        for a in range(model.num_actions):
            probs, _ = observation_probabilities(model, b, a)
            self.assertAlmostEqual(float(probs.sum()), 1.0, places=12)
            for o in range(model.num_observations):
                _, normalizer = belief_update(model, b, a, o)
                self.assertAlmostEqual(normalizer, float(probs[o]),
                                       places=12)

    def test_listening_sharpens_the_belief(self):
        model = listen_or_reset()
        posterior, normalizer = belief_update(model,
                                              model.initial_belief, 0, 0)
        np.testing.assert_allclose(posterior.probs, [0.85, 0.15])
        self.assertAlmostEqual(normalizer, 0.5)

    def test_impossible_observation(self):
        transition = (sp.identity(2, format="csr"),)
        observation = (sp.csr_matrix(np.array([[1.0, 0.0], [1.0, 0.0]])),)
        model = DiscretePomdp(2, 1, 2, transition, observation,
                              np.zeros((1, 2)), 0.9,
                              BeliefState(np.array([0.5, 0.5])))
        with self.assertRaises(ImpossibleObservationError):
            belief_update(model, model.initial_belief, 0, 1)

    def test_out_of_range_indices(self):
        model = listen_or_reset()
        with self.assertRaises(IndexError):
            belief_update(model, model.initial_belief, 2, 0)
        with self.assertRaises(IndexError):
            belief_update(model, model.initial_belief, 0, 5)


class TestModelQueries(unittest.TestCase):
    def test_reward_and_failure_probability(self):
        model = listen_or_reset()
        b = BeliefState(np.array([0.25, 0.75]))
        self.assertAlmostEqual(belief_reward(model, b, 1),
                               0.25 * 10.0 - 0.75 * 20.0)
        self.assertAlmostEqual(failure_probability(model, b), 0.75)

    def test_informative_actions(self):
        self.assertEqual(listen_or_reset().informative_actions,
                         (True, False))


class TestValidate(unittest.TestCase):
    def test_random_models_are_valid(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            self.assertEqual(validate(random_pomdp(rng)), [])

    def test_row_deficit_is_reported(self):
        transition = (sp.csr_matrix(np.array([[0.5, 0.4], [0.0, 1.0]])),)
        observation = (sp.csr_matrix(np.ones((2, 1))),)
        model = DiscretePomdp(2, 1, 1, transition, observation,
                              np.zeros((1, 2)), 0.9,
                              BeliefState(np.array([1.0, 0.0])))
        violations = validate(model)
        self.assertEqual(len(violations), 1)
        self.assertEqual(violations[0].matrix, "transition")
        self.assertEqual(violations[0].row, 0)
        self.assertAlmostEqual(violations[0].deviation, -0.1)

    def test_bad_discount_and_belief(self):
        model = listen_or_reset()
        broken = DiscretePomdp(2, 2, 2, model.transition, model.observation,
                               model.reward, 1.0,
                               BeliefState(np.array([0.7, 0.7])))
        matrices = {v.matrix for v in validate(broken)}
        self.assertEqual(matrices, {"discount", "initial_belief"})


class TestValueAt(unittest.TestCase):
    def test_ties_go_to_the_lowest_index(self):
        alpha_set = AlphaVectorSet(np.array([[1.0, 0.0], [1.0, 0.0],
                                             [0.0, 1.0]]), [2, 0, 1])
        value, action = value_at(alpha_set, BeliefState(np.array([1.0,
                                                                  0.0])))
        self.assertEqual(value, 1.0)
        self.assertEqual(action, 2)

    def test_empty_set(self):
        empty = AlphaVectorSet.from_pairs([], 2)
        with self.assertRaises(UninitializedPolicyError):
            value_at(empty, BeliefState.uniform(2))

    def test_mismatched_actions(self):
        with self.assertRaises(ValueError):
            AlphaVectorSet(np.zeros((2, 3)), [0])


if __name__ == "__main__":
    unittest.main()
