import os
import shutil
import tempfile
import unittest

import numpy as np

from pyimplan.base_utils import ImpossibleEvidenceError
from pyimplan.discretization_dbn import (build_scheme, cell_representatives,
                                         condition, digitize,
                                         discretization_error,
                                         expected_damage, failure_probability,
                                         forward_step, likelihood_matrix,
                                         load_dbn, save_dbn,
                                         unroll_failure_curve)
from pyimplan.fatigue_model import CrackGrowthParams, PodCurve
from pyimplan.im_builder import assemble_infinite
from pyimplan.pomdp_core import BeliefState, belief_update
from tests.fixtures import (small_parametric_dbn, small_rate_dbn, toy_costs,
                            traditional_groups)


class TestSchemes(unittest.TestCase):
    def setUp(self):
        self.params = CrackGrowthParams()

    def test_rate_layout(self):
        scheme = build_scheme("deterioration-rate", {"num_d": 30},
                              self.params)
        self.assertEqual(scheme.num_d, 30)
        self.assertEqual(scheme.tau_count, 31)
        self.assertEqual(scheme.num_states, 930)
        self.assertEqual(scheme.index(4, 2), 64)
        self.assertEqual(scheme.d_boundaries[0], 0.0)
        self.assertEqual(scheme.d_boundaries[-2], self.params.d_c)
        self.assertTrue(np.isinf(scheme.d_boundaries[-1]))

    def test_parametric_layout(self):
        scheme = build_scheme("parametric", {"num_d": 40, "num_k": 50},
                              self.params)
        self.assertEqual(scheme.num_states, 2000)
        self.assertTrue(np.all(np.diff(scheme.k_boundaries[:-1]) > 0))

    def test_invalid_sizes(self):
        with self.assertRaises(ValueError):
            build_scheme("deterioration-rate", {"num_d": 2}, self.params)
        with self.assertRaises(ValueError):
            build_scheme("parametric", {"num_d": 10}, self.params)
        with self.assertRaises(ValueError):
            build_scheme("markov", {"num_d": 10}, self.params)

    def test_cells_and_representatives(self):
        boundaries = np.array([0.0, 1.0, 4.0, 20.0, np.inf])
        np.testing.assert_allclose(cell_representatives(boundaries),
                                   [0.5, 2.0, np.sqrt(80.0), 20.0])
        np.testing.assert_array_equal(
            digitize(np.array([0.0, 0.99, 1.0, 20.0, 1e9]), boundaries),
            [0, 0, 1, 3, 3])


class TestCompiledRateDbn(unittest.TestCase):
    def setUp(self):
        self.dbn = small_rate_dbn()

    def test_rows_are_stochastic(self):
        sums = np.asarray(self.dbn.transition.sum(axis=1)).ravel()
        np.testing.assert_allclose(sums, 1.0, atol=1e-12)
        self.assertAlmostEqual(float(self.dbn.initial_belief.sum()), 1.0)

    def test_rate_advances_until_the_last_one(self):
        scheme = self.dbn.scheme
        matrix = self.dbn.transition.tocoo()
        blocks = self.dbn.block_of_state
        live = ~self.dbn.failure_mask[matrix.row] \
            & (blocks[matrix.row] < scheme.tau_count - 1)
        np.testing.assert_array_equal(blocks[matrix.col[live]],
                                      blocks[matrix.row[live]] + 1)

    def test_failure_cells_absorb(self):
        for s in self.dbn.failure_states:
            row = self.dbn.transition.getrow(s)
            self.assertEqual(row.nnz, 1)
            self.assertEqual(row.indices[0], s)

    def test_failure_curve_is_cumulative(self):
        curve = unroll_failure_curve(self.dbn)
        self.assertEqual(curve.shape, (self.dbn.params.t_N + 1,))
        self.assertTrue(np.all(np.diff(curve) >= -1e-15))

    def test_no_detection_evidence(self):
        curve = PodCurve(8.0)
        prior = unroll_failure_curve(self.dbn)
        posterior = unroll_failure_curve(self.dbn, [(2, curve, 0)])
        np.testing.assert_allclose(posterior[:2], prior[:2])
        self.assertLessEqual(posterior[-1], prior[-1] + 1e-15)
        with self.assertRaises(ValueError):
            unroll_failure_curve(self.dbn, [(99, curve, 0)])

    def test_forward_step_matches_belief_update(self):
        groups = traditional_groups()
        model = assemble_infinite(self.dbn, groups, toy_costs())
        table = likelihood_matrix(self.dbn, groups[1].curve)
        rng = np.random.default_rng(0)
        for _ in range(20):
            mass = rng.random(self.dbn.num_states)
            b = BeliefState(mass / mass.sum())
            for o in range(2):
                expected, _ = belief_update(model, b, 1, o)
                actual = forward_step(self.dbn, b, (table, o))
                np.testing.assert_allclose(actual.probs, expected.probs,
                                           atol=1e-12)
            plain, _ = belief_update(model, b, 0, 0)
            np.testing.assert_allclose(forward_step(self.dbn, b).probs,
                                       plain.probs, atol=1e-12)

    def test_impossible_evidence(self):
        table = np.zeros((self.dbn.num_states, 2))
        table[:, 0] = 1.0
        b = BeliefState(self.dbn.initial_belief)
        with self.assertRaises(ImpossibleEvidenceError):
            forward_step(self.dbn, b, (table, 1))
        with self.assertRaises(ImpossibleEvidenceError):
            condition(b, (table, 1))

    def test_queries(self):
        b = BeliefState(self.dbn.initial_belief)
        self.assertEqual(failure_probability(self.dbn, b),
                         float(self.dbn.initial_belief[
                             self.dbn.failure_states].sum()))
        self.assertGreater(expected_damage(self.dbn, b), 0.0)

    def test_same_seed_same_matrix(self):
        again = small_rate_dbn()
        self.assertEqual((self.dbn.transition != again.transition).nnz, 0)

    def test_save_and_load(self):
        directory = tempfile.mkdtemp()
        try:
            npz, report = save_dbn(self.dbn, os.path.join(directory,
                                                          "dbn.npz"))
            self.assertTrue(os.path.exists(report))
            loaded = load_dbn(npz)
            self.assertEqual((loaded.transition
                              != self.dbn.transition).nnz, 0)
            np.testing.assert_array_equal(loaded.initial_belief,
                                          self.dbn.initial_belief)
            self.assertEqual(loaded.params, self.dbn.params)
            self.assertEqual(loaded.scheme.tau_count,
                             self.dbn.scheme.tau_count)
            self.assertEqual(loaded.report["scheme"], "DR_small")
        finally:
            shutil.rmtree(directory)


class TestCompiledParametricDbn(unittest.TestCase):
    def setUp(self):
        self.dbn = small_parametric_dbn()

    def test_block_diagonal(self):
        matrix = self.dbn.transition.tocoo()
        blocks = self.dbn.block_of_state
        np.testing.assert_array_equal(blocks[matrix.row], blocks[matrix.col])
        sums = np.asarray(self.dbn.transition.sum(axis=1)).ravel()
        np.testing.assert_allclose(sums, 1.0, atol=1e-12)

    def test_damage_never_decreases(self):
        matrix = self.dbn.transition.tocoo()
        cells = self.dbn.d_cell_of_state
        self.assertTrue(np.all(cells[matrix.col] >= cells[matrix.row]))


class TestDiscretizationError(unittest.TestCase):
    def test_identical_curves(self):
        curve = np.linspace(0.0, 0.1, 31)
        self.assertEqual(discretization_error(curve, curve), 0.0)

    def test_scaled_error(self):
        mcs = np.array([0.0, 1.0, 2.0, 3.0])
        dbn = mcs + 0.1
        std = mcs.std()
        self.assertAlmostEqual(discretization_error(dbn, mcs),
                               4 * (0.1 / std) ** 2)

    def test_invalid_curves(self):
        with self.assertRaises(ValueError):
            discretization_error(np.zeros(3), np.zeros(4))
        with self.assertRaises(ValueError):
            discretization_error(np.zeros(3), np.ones(3))


if __name__ == "__main__":
    unittest.main()
