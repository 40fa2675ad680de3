import unittest

import numpy as np

from pyimplan.base_utils import DegenerateConditioningError, substream
from pyimplan.fatigue_model import (CrackGrowthParams, PodCurve, PoiCurve,
                                    conditional_failure_curve, grow_crack,
                                    grow_crack_k, make_curve, num_outcomes,
                                    outcome_probabilities, pod_eval,
                                    reference_failure_curve,
                                    sample_k_prior, sample_trajectories,
                                    trajectories_to_rows)
from tests.fixtures import short_params


class TestCrackGrowth(unittest.TestCase):
    def setUp(self):
        self.params = CrackGrowthParams()
        self.C = np.exp(self.params.lnC_mean)
        self.S = self.params.S_mean

    def test_growth_is_monotone_and_capped(self):
        d = np.array([0.01, 0.5, 1.0, 5.0, 19.0])
        grown = grow_crack(self.params, d, self.C, self.S)
        self.assertTrue(np.all(grown > d))
        self.assertTrue(np.all(grown <= self.params.d_c))

    def test_failed_cracks_stay_failed(self):
        grown = grow_crack(self.params, self.params.d_c, self.C, self.S)
        self.assertEqual(grown, self.params.d_c)

    def test_grouped_parameter_form(self):
        K = self.params.k_from(self.C, self.S)
        self.assertEqual(grow_crack(self.params, 1.0, self.C, self.S),
                         grow_crack_k(self.params, 1.0, K))

    def test_non_positive_crack_size(self):
        with self.assertRaises(ValueError):
            grow_crack(self.params, 0.0, self.C, self.S)
        with self.assertRaises(ValueError):
            grow_crack(self.params, np.array([1.0, -1.0]), self.C, self.S)

    def test_parameter_validation(self):
        with self.assertRaises(ValueError):
            CrackGrowthParams(m=2.0)
        with self.assertRaises(ValueError):
            CrackGrowthParams.from_dict({"unknown": 1.0})

    def test_deterministic_copy(self):
        params = self.params.deterministic()
        rng = np.random.default_rng(0)
        K = sample_k_prior(params, 10, rng)
        np.testing.assert_allclose(K, params.k_at_mean)


class TestInspectionCurves(unittest.TestCase):
    def test_pod_shape(self):
        curve = PodCurve(8.0)
        self.assertEqual(pod_eval(curve, 0.0), 0.0)
        values = pod_eval(curve, np.array([1.0, 5.0, 20.0]))
        self.assertTrue(np.all(np.diff(values) > 0))
        self.assertAlmostEqual(pod_eval(PodCurve(8.0, 0.9), 1e9), 0.9)

    def test_indicator_probabilities_sum_to_one(self):
        curve = PoiCurve.from_scales([4.0, 7.0, 10.0, 13.0])
        table = outcome_probabilities(curve, np.linspace(0.0, 30.0, 50))
        self.assertEqual(table.shape, (50, 5))
        np.testing.assert_allclose(table.sum(axis=1), 1.0, atol=1e-12)
        self.assertTrue(np.all(table >= 0))

    def test_make_curve(self):
        self.assertEqual(num_outcomes(make_curve({"type": "pod",
                                                  "scale": 8})), 2)
        self.assertEqual(num_outcomes(make_curve(
            {"type": "poi", "scales": [4, 7]})), 3)
        with self.assertRaises(ValueError):
            make_curve({"type": "ultrasound"})
        with self.assertRaises(ValueError):
            PoiCurve.from_scales([7.0, 4.0])


class TestTrajectories(unittest.TestCase):
    def setUp(self):
        self.params = short_params()

    def test_same_seed_same_draws(self):
        one = sample_trajectories(self.params, 1000, seed=4, num_workers=1,
                                  chunk_size=300)
        two = sample_trajectories(self.params, 1000, seed=4, num_workers=3,
                                  chunk_size=300)
        np.testing.assert_array_equal(one.cracks, two.cracks)
        self.assertEqual(one.cracks.shape, (1000, self.params.t_N + 1))
        self.assertTrue(np.all(np.diff(one.cracks, axis=1) >= 0))

    def test_unconditioned_curve_is_failed_fraction(self):
        trajectories = sample_trajectories(self.params, 2000, seed=2)
        curve = conditional_failure_curve(trajectories)
        expected = np.mean(trajectories.cracks >= self.params.d_c, axis=0)
        np.testing.assert_allclose(curve, expected)
        self.assertTrue(np.all(np.diff(curve) >= 0))

    def test_streaming_reference_matches(self):
        curve = PodCurve(8.0)
        inspections = [(3, curve, 0)]
        trajectories = sample_trajectories(self.params, 3000, seed=5,
                                           chunk_size=1000)
        direct = conditional_failure_curve(trajectories, inspections)
        streamed = reference_failure_curve(self.params, 3000, seed=5,
                                           inspections=inspections,
                                           num_workers=2, chunk_size=1000)
        np.testing.assert_allclose(streamed, direct, rtol=1e-12)

    def test_no_detection_lowers_failure_probability(self):
        trajectories = sample_trajectories(self.params, 5000, seed=8)
        prior = conditional_failure_curve(trajectories)
        posterior = conditional_failure_curve(
            trajectories, [(2, PodCurve(8.0), 0)])
        self.assertLessEqual(posterior[-1], prior[-1])

    def test_degenerate_conditioning(self):
        trajectories = sample_trajectories(self.params, 200, seed=1)
        with self.assertRaises(DegenerateConditioningError):
            conditional_failure_curve(trajectories,
                                      [(1, PodCurve(8.0), 0)],
                                      min_ess=1e6)

    def test_rows(self):
        trajectories = sample_trajectories(self.params, 10, seed=0)
        rows = trajectories_to_rows(trajectories, limit=3)
        self.assertEqual(len(rows), 3)
        self.assertIn("d_%d" % self.params.t_N, rows[0])

    def test_substreams_are_independent_of_order(self):
        first = substream(3, 1).random(4)
        substream(3, 0).random(100)
        np.testing.assert_array_equal(first, substream(3, 1).random(4))


if __name__ == "__main__":
    unittest.main()
