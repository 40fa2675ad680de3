import os
import shutil
import tempfile
import unittest
from unittest import mock

import yaml

from pyimplan.base import ImPlanningBase
from pyimplan.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, make_session, run
from pyimplan.interchange import read_interchange

SMALL_EXPERIMENT = {
    "scheme": "DR_d15",
    "deterioration": {"t_N": 5},
    "samples_per_cell": 50,
    "costs": {"inspection": {"I": 1.0},
              "repair": {"perfect-repair": 10.0},
              "failure": 100.0}
}


class TestCommandLine(unittest.TestCase):
    def setUp(self):
        self.directory = tempfile.mkdtemp()
        self.config = os.path.join(self.directory, "experiment.yaml")
        info = dict(SMALL_EXPERIMENT,
                    run_dir=os.path.join(self.directory, "run"))
        with open(self.config, "w") as fp:
            yaml.safe_dump({"experiment_info": info}, fp)

    def tearDown(self):
        shutil.rmtree(self.directory)

    def path(self, name):
        return os.path.join(self.directory, name)

    def test_presets(self):
        self.assertEqual(run(["presets"]), EXIT_OK)

    def test_configuration_errors(self):
        self.assertEqual(run(["build", "NO-SUCH-PRESET"]), EXIT_CONFIG)
        self.assertEqual(run(["build", self.path("missing.yaml")]),
                         EXIT_CONFIG)
        self.assertEqual(run(["build"]), EXIT_CONFIG)
        self.assertEqual(run(["import"]), EXIT_CONFIG)
        with open(self.path("empty.yaml"), "w") as fp:
            fp.write("other: 1\n")
        self.assertEqual(run(["build", self.path("empty.yaml")]),
                         EXIT_CONFIG)
        with self.assertRaises(SystemExit):
            run(["optimize", self.config])

    def test_numerical_failures(self):
        with mock.patch.object(ImPlanningBase, "command",
                               side_effect=ValueError("singular matrix")):
            self.assertEqual(run(["build", self.config]), EXIT_NUMERIC)
        with mock.patch.object(ImPlanningBase, "command",
                               side_effect=PermissionError("read-only")):
            self.assertEqual(run(["build", self.config]), EXIT_CONFIG)

    def test_build_writes_summary(self):
        self.assertEqual(run(["build", self.config]), EXIT_OK)
        run_dir = self.path("run")
        with open(os.path.join(run_dir, "build_summary.yaml")) as fp:
            summary = yaml.safe_load(fp)
        self.assertEqual(summary["num_states"], 15 * 6)
        self.assertEqual(summary["violations"], [])
        self.assertTrue(os.path.exists(os.path.join(run_dir,
                                                    "resolved_config.yaml")))

    def test_run_dir_override(self):
        other = self.path("elsewhere")
        self.assertEqual(run(["build", self.config, "--run-dir", other]),
                         EXIT_OK)
        self.assertTrue(os.path.exists(os.path.join(other,
                                                    "build_summary.yaml")))

    def test_state_budget(self):
        with open(self.config) as fp:
            document = yaml.safe_load(fp)
        document["experiment_info"]["max_states"] = 10
        with open(self.config, "w") as fp:
            yaml.safe_dump(document, fp)
        self.assertEqual(run(["build", self.config, "--finite"]),
                         EXIT_CONFIG)

    def test_export_then_import(self):
        output = self.path("model.pomdp")
        self.assertEqual(run(["export", self.config, "--output", output]),
                         EXIT_OK)
        self.assertEqual(read_interchange(output).num_states, 15 * 6)
        self.assertEqual(run(["import", output]), EXIT_OK)

    def test_import_reports_problems(self):
        broken = self.path("broken.pomdp")
        with open(broken, "w") as fp:
            fp.write("discount: 0.9\nstates: 2\nactions: 1\n"
                     "observations: 1\nT: 0 : 0 : 0 0.5\n"
                     "T: 0 : 1 : 1 1.0\nO: 0 : * : 0 1.0\n")
        self.assertEqual(run(["import", broken]), EXIT_NUMERIC)
        with open(broken, "w") as fp:
            fp.write("discount: 0.9\nstates: 2\nT: 0 : 0 : 0 1.0\n")
        self.assertEqual(run(["import", broken]), EXIT_NUMERIC)
        self.assertEqual(run(["import", self.path("nothing.pomdp")]),
                         EXIT_CONFIG)

    def test_preset_session(self):
        session = make_session("R_RI10-R_FR10", {"seed": 3})
        self.assertEqual(session.name, "R_RI10-R_FR10")
        self.assertEqual(session.seed, 3)
        self.assertEqual(session.horizon, 30)


if __name__ == "__main__":
    unittest.main()
