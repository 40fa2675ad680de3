import unittest
from types import SimpleNamespace

import numpy as np
import scipy.sparse as sp

from pyimplan.base_utils import CalibrationError
from pyimplan.constants import (COMPLEX_HEURISTICS, INSPECTION_PRESETS,
                                MAINTENANCE_SEVERITY)
from pyimplan.discretization_dbn import unroll_failure_curve
from pyimplan.fatigue_model import PodCurve
from pyimplan.im_builder import assemble_infinite
from pyimplan.rbi_heuristics import (CostBreakdown, HeuristicPolicy,
                                     HeuristicRule, InspectionPlan,
                                     MaintenanceRule, build_rules,
                                     calibrate_discount, evaluate_analytic,
                                     evaluate_simulated, grid_search,
                                     grid_table_rows,
                                     monotone_observation_maps,
                                     plan_inspects)
from tests.fixtures import small_rate_dbn, toy_costs, traditional_groups


def equidistant(interval, name="EQ-INS"):
    return HeuristicRule(name, InspectionPlan("equidistant", "I",
                                              PodCurve(8.0),
                                              interval=interval))


class TestRules(unittest.TestCase):
    def test_monotone_maps(self):
        maps = monotone_observation_maps(
            5, ["perfect-repair", "do-nothing", "minor-repair"])
        self.assertEqual(len(maps), 21)
        self.assertEqual(maps[0], ("do-nothing",) * 5)
        for mapping in maps:
            severity = [MAINTENANCE_SEVERITY[m] for m in mapping]
            self.assertEqual(severity, sorted(severity))

    def test_build_rules(self):
        families = {f["name"]: f for f in COMPLEX_HEURISTICS["families"]}
        grid = COMPLEX_HEURISTICS
        rules = build_rules(families["EQ-INS2"], grid, INSPECTION_PRESETS)
        self.assertEqual(len(rules), len(grid["intervals"]) * 21)
        rules = build_rules(families["EQ-INS1"], grid, INSPECTION_PRESETS)
        self.assertEqual(len(rules), len(grid["intervals"]) * 6)
        rules = build_rules(families["THR-INS2-PF"], grid,
                            INSPECTION_PRESETS)
        self.assertEqual(len(rules), len(grid["thresholds"])
                         * len(grid["pf_thresholds"]))
        self.assertEqual(rules[0].maintenance.label, "pRP-PF>0.005")

    def test_invalid_rules(self):
        with self.assertRaises(ValueError):
            InspectionPlan("equidistant", "I", PodCurve(8.0), interval=0)
        with self.assertRaises(ValueError):
            InspectionPlan("threshold", "I")
        with self.assertRaises(ValueError):
            MaintenanceRule("observation-map")
        with self.assertRaises(ValueError):
            MaintenanceRule("replace")


class TestInspectionPlans(unittest.TestCase):
    def test_equidistant_years(self):
        plan = equidistant(3).plan
        years = [year for year in range(10)
                 if plan_inspects(plan, year, None, None, None, 10)]
        self.assertEqual(years, [2, 5, 8])
        self.assertFalse(plan_inspects(InspectionPlan(), 0, None, None,
                                       None, 10))

    def test_threshold_looks_at_the_inspection_year(self):
        transition_t = sp.csr_matrix(np.array([[0.9, 0.1],
                                               [0.0, 1.0]]).T)
        failure_mask = np.array([False, True])
        probs = np.array([1.0, 0.0])
        low = InspectionPlan("threshold", "I", PodCurve(8.0),
                             threshold=0.05)
        high = InspectionPlan("threshold", "I", PodCurve(8.0),
                              threshold=0.1)
        self.assertTrue(plan_inspects(low, 0, probs, transition_t,
                                      failure_mask, 10))
        self.assertFalse(plan_inspects(high, 0, probs, transition_t,
                                       failure_mask, 10))
        self.assertFalse(plan_inspects(low, 9, probs, transition_t,
                                       failure_mask, 10))

    def test_threshold_ignores_the_following_year(self):
        # failures only start in the second year
        transition_t = sp.csr_matrix(np.array([[0.0, 1.0, 0.0],
                                               [0.0, 0.5, 0.5],
                                               [0.0, 0.0, 1.0]]).T)
        failure_mask = np.array([False, False, True])
        plan = InspectionPlan("threshold", "I", PodCurve(8.0),
                              threshold=0.1)
        probs = np.array([1.0, 0.0, 0.0])
        self.assertFalse(plan_inspects(plan, 0, probs, transition_t,
                                       failure_mask, 10))
        probs = np.array([0.0, 1.0, 0.0])
        self.assertTrue(plan_inspects(plan, 1, probs, transition_t,
                                      failure_mask, 10))


class TestGridSearch(unittest.TestCase):
    def test_ties_prefer_short_intervals(self):
        rules = [equidistant(i) for i in (5, 2, 8)]
        best, result, table = grid_search(
            rules, lambda rule: CostBreakdown(1.0, 0.0, 0.0), num_workers=1)
        self.assertEqual(best.plan.interval, 2)
        self.assertEqual(len(table), 3)
        self.assertEqual(grid_table_rows(table)[0]["C_T"], 1.0)

    def test_ties_prefer_large_thresholds(self):
        rules = [HeuristicRule("THR", InspectionPlan(
            "threshold", "I", PodCurve(8.0), threshold=x))
            for x in (1e-3, 5e-3, 2e-3)]
        best, _, _ = grid_search(
            rules, lambda rule: CostBreakdown(0.0, 0.0, 2.0), num_workers=1)
        self.assertEqual(best.plan.threshold, 5e-3)

    def test_cheapest_rule_wins(self):
        rules = [equidistant(i) for i in (1, 2, 3)]
        best, result, _ = grid_search(
            rules, lambda rule: CostBreakdown(abs(rule.plan.interval - 2),
                                              0.0, 0.0), num_workers=1)
        self.assertEqual(best.plan.interval, 2)
        self.assertEqual(result.total, 0.0)

    def test_empty_grid(self):
        with self.assertRaises(ValueError):
            grid_search([], lambda rule: None)


class TestAnalyticEvaluation(unittest.TestCase):
    def setUp(self):
        self.dbn = small_rate_dbn()
        self.costs = toy_costs()
        self.horizon = self.dbn.params.t_N

    def test_no_inspection_is_discounted_risk(self):
        rule = HeuristicRule("NONE", InspectionPlan())
        result = evaluate_analytic(self.dbn, rule, self.costs)
        increments = np.diff(unroll_failure_curve(self.dbn))
        years = np.arange(1, self.horizon + 1)
        expected = 100.0 * float(increments @ 0.95 ** years)
        self.assertAlmostEqual(result.failure, expected, places=12)
        self.assertEqual(result.inspection, 0.0)
        self.assertEqual(result.repair, 0.0)
        self.assertEqual(result.ci, 0.0)

    def test_equidistant_inspection_costs(self):
        result = evaluate_analytic(self.dbn, equidistant(2), self.costs)
        self.assertEqual(result.inspection_years, (2, 4))
        self.assertAlmostEqual(result.inspection, 0.95 ** 2 + 0.95 ** 4)
        self.assertGreaterEqual(result.repair, 0.0)

    def test_inspection_years_bill_undetected_failures(self):
        # intact (d = 0) fails with 0.5 per year into d = 20
        chain = SimpleNamespace(
            transition_t=sp.csr_matrix(np.array([[0.5, 0.5],
                                                 [0.0, 1.0]]).T),
            failure_mask=np.array([False, True]),
            initial_belief=np.array([1.0, 0.0]),
            damage=np.array([0.0, 20.0]))
        result = evaluate_analytic(chain, equidistant(1), self.costs, 3)
        self.assertEqual(result.inspection_years, (1, 2))

        q = np.exp(-2.5)
        missed_2 = (0.5 + 0.5 * q + q ** 2) / (1 + q)
        failure = (100 * 0.95 * q / (1 + q)
                   + 100 * 0.95 ** 2 * 0.5 * q / (0.5 + 0.5 * q + q ** 2)
                   + 100 * 0.95 ** 3 * 0.25 / (0.5 + 0.5 * q + q ** 2))
        repair = (10 * 0.95 * 0.5 * (1 - q)
                  + 10 * 0.95 ** 2 * (1 - missed_2))
        self.assertAlmostEqual(result.failure, failure, places=10)
        self.assertAlmostEqual(result.repair, repair, places=10)
        self.assertAlmostEqual(result.inspection, 0.95 + 0.95 ** 2)

    def test_inspections_lower_the_failure_risk(self):
        none = evaluate_analytic(self.dbn, HeuristicRule(
            "NONE", InspectionPlan()), self.costs)
        blind = HeuristicRule("EQ", InspectionPlan(
            "equidistant", "I", PodCurve(1.0e9), interval=2))
        result = evaluate_analytic(self.dbn, blind, self.costs)
        self.assertAlmostEqual(result.failure, none.failure,
                               delta=1.0e-6 * none.failure)
        self.assertLess(result.repair, 1.0e-6)
        sharp = evaluate_analytic(self.dbn, equidistant(2), self.costs)
        self.assertLess(sharp.failure, none.failure)

    def test_needs_repair_on_detection(self):
        rule = HeuristicRule("MAP", equidistant(2).plan,
                             MaintenanceRule("pf-threshold", threshold=0.1))
        with self.assertRaises(ValueError):
            evaluate_analytic(self.dbn, rule, self.costs)


class TestSimulatedEvaluation(unittest.TestCase):
    def setUp(self):
        self.dbn = small_rate_dbn()
        self.costs = toy_costs()
        self.groups = traditional_groups(self.costs)
        self.model = assemble_infinite(self.dbn, self.groups, self.costs)

    def test_inspection_schedule(self):
        horizon = self.dbn.params.t_N
        result = evaluate_simulated(self.model, self.groups, equidistant(2),
                                    self.costs, 200, horizon, seed=4)
        episodes = result.num_episodes
        self.assertEqual(result.histogram[0, 0], episodes)
        self.assertEqual(result.histogram[1, 1], episodes)
        self.assertEqual(result.histogram[3, 1], episodes)
        self.assertEqual(int(result.histogram[:, 2].sum()),
                         int(result.histogram[2, 2]
                             + result.histogram[4, 2]))

    def test_agrees_with_analytic_without_inspections(self):
        rule = HeuristicRule("NONE", InspectionPlan())
        horizon = self.dbn.params.t_N
        analytic = evaluate_analytic(self.dbn, rule, self.costs)
        simulated = evaluate_simulated(self.model, self.groups, rule,
                                       self.costs, 50, horizon, seed=2)
        self.assertAlmostEqual(simulated.mean, analytic.total, places=10)
        self.assertAlmostEqual(simulated.ci, 0.0, places=10)

    def test_repairs_reset_the_simulated_component(self):
        horizon = self.dbn.params.t_N
        analytic = evaluate_analytic(self.dbn, equidistant(2), self.costs)
        simulated = evaluate_simulated(self.model, self.groups,
                                       equidistant(2), self.costs, 400,
                                       horizon, seed=5)
        self.assertAlmostEqual(simulated.breakdown["inspection"],
                               analytic.inspection, places=10)
        self.assertGreaterEqual(simulated.breakdown["repair"], 0.0)

    def test_missing_inspection_group(self):
        rule = HeuristicRule("EQ", InspectionPlan(
            "equidistant", "I2", PodCurve(8.0), interval=2))
        with self.assertRaises(ValueError):
            HeuristicPolicy(self.model, self.groups, rule, 5)


class TestCalibration(unittest.TestCase):
    def setUp(self):
        self.dbn = small_rate_dbn()
        curve = unroll_failure_curve(self.dbn)
        self.increments = np.diff(curve)
        self.years = np.arange(1, curve.size)

    def test_recovers_the_discount(self):
        self.assertGreater(float(self.increments.sum()), 0.0)
        failure_cost = 1.0e6
        target = failure_cost * float(self.increments @ 0.9 ** self.years)
        gamma = calibrate_discount(self.dbn, failure_cost, target)
        self.assertAlmostEqual(gamma, 0.9, places=6)

    def test_target_out_of_reach(self):
        with self.assertRaises(CalibrationError):
            calibrate_discount(self.dbn, 1.0, 1.0e12)


if __name__ == "__main__":
    unittest.main()
