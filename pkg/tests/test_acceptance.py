"""End-to-end checks against the published reference values.

These compile full-size DBNs, run million-sample Monte Carlo references and
two-minute solves; set PYIMPLAN_SLOW_TESTS=1 to run them.
"""

import os
import shutil
import tempfile
import unittest

from pyimplan.base import ImPlanningBase
from pyimplan.rbi_heuristics import (HeuristicPolicy, HeuristicRule,
                                     InspectionPlan, evaluate_analytic)
from tests.fixtures import SLOW


def session_for(preset, run_dir, **extra):
    info = {"preset": preset, "run_dir": run_dir}
    info.update(extra)
    return ImPlanningBase(info)


def groups_used(session, result):
    """Groups picked at least once over the simulated episodes."""
    counts = result.histogram.sum(axis=0)
    return [group for group, count in zip(session.groups, counts) if count]


@unittest.skipUnless(SLOW, "set PYIMPLAN_SLOW_TESTS=1")
class TestReferenceValues(unittest.TestCase):
    def setUp(self):
        self.run_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.run_dir)

    def test_rate_scheme_accuracy(self):
        session = session_for("discretization", self.run_dir,
                              schemes=["DR_d15", "DR_d30"],
                              conditioning=[])
        xi = {row["scheme"]: row["xi"] for row in session.discretize()}
        self.assertLessEqual(xi["DR_d30"], 1.0e-3)
        self.assertGreater(xi["DR_d15"], xi["DR_d30"])

    def test_parametric_scheme_accuracy(self):
        schemes = ["PAR_K50-d40", "PAR_K50-d80", "PAR_K100-d160"]
        session = session_for("discretization", self.run_dir,
                              schemes=schemes, conditioning=[])
        xi = {row["scheme"]: row["xi"] for row in session.discretize()}
        self.assertGreater(xi["PAR_K50-d40"], xi["PAR_K50-d80"])
        self.assertGreater(xi["PAR_K50-d80"], xi["PAR_K100-d160"])
        for scheme, published in (("PAR_K50-d40", 7.1e-2),
                                  ("PAR_K100-d160", 4.3e-4)):
            self.assertLess(xi[scheme], 3.0 * published, scheme)
            self.assertGreater(xi[scheme], published / 3.0, scheme)

    def test_calibrated_no_inspection_cost(self):
        session = session_for("R_RI10-R_FR10", self.run_dir)
        rule = HeuristicRule("NONE", InspectionPlan())
        result = evaluate_analytic(session.dbn(), rule, session.costs,
                                   session.horizon)
        self.assertAlmostEqual(result.total, 2.25, delta=0.01)

    def test_heuristic_optima(self):
        expected = {"R_RI20-R_FR100": (4, 69.17, 65.62),
                    "R_RI50-R_FR20": (11, 17.06, 16.69)}
        for preset, (interval, eq_cost, thr_cost) in expected.items():
            session = session_for(preset, os.path.join(self.run_dir,
                                                       preset))
            best = session.heuristics()
            rule, result = best["EQ-INS"]
            self.assertEqual(rule.plan.interval, interval, preset)
            self.assertAlmostEqual(result.total, eq_cost,
                                   delta=0.05 * eq_cost)
            _, result = best["THR-INS"]
            self.assertAlmostEqual(result.total, thr_cost,
                                   delta=0.05 * thr_cost)

    def test_solver_dominates_heuristics(self):
        levels = {"R_RI20-R_FR100": 58.35, "R_RI10-R_FR10": 2.25,
                  "R_RI50-R_FR20": 12.45}
        for preset, level in levels.items():
            session = session_for(preset, os.path.join(self.run_dir,
                                                       preset))
            bounds, _ = session.solve(finite=True)
            cost = -bounds.lower_value(bounds.initial)
            self.assertAlmostEqual(cost, level, delta=0.05 * level)
            heuristic = min(result.total for _, result in
                            session.heuristics().values())
            self.assertLessEqual(cost, heuristic * 1.01, preset)

    def test_complex_setting_level(self):
        session = session_for("complex", self.run_dir)
        bounds, _ = session.solve(finite=True)
        cost = -bounds.lower_value(bounds.initial)
        self.assertAlmostEqual(cost, 12.26, delta=0.05 * 12.26)
        heuristic = min(result.total for _, result in
                        session.heuristics().values())
        self.assertLessEqual(cost, heuristic * 1.01)

    def test_simulated_policies_match_the_bounds(self):
        session = session_for("R_RI50-R_FR20", self.run_dir)
        bounds, _ = session.solve(finite=True)
        bound = -bounds.lower_value(bounds.initial)
        result = session.evaluate(finite=True)
        self.assertEqual(result.num_episodes, 10000)
        self.assertLessEqual(abs(result.mean - bound),
                             result.ci + 0.02 * bound)

        result = session.evaluate(finite=False)
        self.assertAlmostEqual(result.mean, 12.99, delta=0.08 * 12.99)
        scheme = "PAR_K100-d160"
        session.solve(finite=False, scheme=scheme)
        result = session.simulate(session.policy(False, scheme), False,
                                  "pomdp-ih-par", scheme)
        self.assertAlmostEqual(result.mean, 13.08, delta=0.08 * 13.08)

    def test_complex_policy_uses_every_action_type(self):
        session = session_for("complex", self.run_dir)
        used = groups_used(session, session.evaluate(finite=True))
        self.assertEqual({g.inspection for g in used if g.observes},
                         {"I1", "I2"})
        self.assertTrue({"minor-repair", "perfect-repair"}
                        <= {g.maintenance for g in used})

        for family, (rule, _) in session.heuristics().items():
            policy = HeuristicPolicy(session.model(), session.groups, rule,
                                     session.horizon)
            result = session.simulate(policy, tag="heuristic-%s" % family)
            inspections = {g.inspection for g in
                           groups_used(session, result) if g.observes}
            expected = {rule.plan.inspection} if rule.plan.observes else set()
            self.assertEqual(inspections, expected, family)


if __name__ == "__main__":
    unittest.main()
