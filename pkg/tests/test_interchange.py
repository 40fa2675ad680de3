import os
import shutil
import tempfile
import unittest

import numpy as np

from pyimplan.base_utils import InterchangeParseError
from pyimplan.im_builder import assemble_finite
from pyimplan.interchange import (export_interchange, import_interchange,
                                  read_interchange, write_interchange)
from pyimplan.pomdp_core import validate
from tests.fixtures import (listen_or_reset, small_rate_dbn, toy_costs,
                            traditional_groups)

HEADER = """discount: 0.9
values: reward
states: 2
actions: 2
observations: 2
"""


def assert_same_model(test, one, two):
    test.assertEqual(one.discount, two.discount)
    for a in range(one.num_actions):
        np.testing.assert_array_equal(one.transition[a].toarray(),
                                      two.transition[a].toarray())
        np.testing.assert_array_equal(one.observation[a].toarray(),
                                      two.observation[a].toarray())
    np.testing.assert_array_equal(one.reward, two.reward)
    np.testing.assert_array_equal(one.initial_belief.probs,
                                  two.initial_belief.probs)
    np.testing.assert_array_equal(one.failure_states, two.failure_states)
    np.testing.assert_array_equal(one.terminal_states, two.terminal_states)


class TestRoundTrip(unittest.TestCase):
    def test_toy_model(self):
        model = listen_or_reset()
        text = export_interchange(model)
        self.assertIn("states: good bad", text)
        self.assertIn("#! failure: 1", text)
        loaded = import_interchange(text)
        assert_same_model(self, model, loaded)
        self.assertEqual(loaded.action_names, ("listen", "reset"))

    def test_numbers_print_shortest_and_text_is_stable(self):
        costs = toy_costs()
        model = assemble_finite(small_rate_dbn(), traditional_groups(costs),
                                costs, horizon=3)
        text = export_interchange(model)
        self.assertIn("discount: 0.95\n", text)
        self.assertEqual(export_interchange(import_interchange(text)), text)

    def test_finite_model_file(self):
        dbn = small_rate_dbn()
        costs = toy_costs()
        model = assemble_finite(dbn, traditional_groups(costs), costs,
                                horizon=3)
        directory = tempfile.mkdtemp()
        try:
            path = write_interchange(model, os.path.join(directory,
                                                         "model.pomdp"))
            loaded = read_interchange(path)
        finally:
            shutil.rmtree(directory)
        assert_same_model(self, model, loaded)
        self.assertEqual(validate(loaded), [])
        np.testing.assert_array_equal(loaded.state_features["step"],
                                      model.state_features["step"])
        self.assertEqual(loaded.state_names, model.state_names)


class TestReader(unittest.TestCase):
    def test_wildcards_and_overrides(self):
        text = HEADER + """
T: * : * : 0 1.0
T: 1 : 1 : 0 0.0
T: 1 : 1 : 1 1.0
O: * : * : * 0.5
R: 0 : * : * : * -1
"""
        model = import_interchange(text)
        np.testing.assert_array_equal(model.transition[0].toarray(),
                                      [[1.0, 0.0], [1.0, 0.0]])
        np.testing.assert_array_equal(model.transition[1].toarray(),
                                      [[1.0, 0.0], [0.0, 1.0]])
        np.testing.assert_array_equal(model.reward, [[-1.0, -1.0],
                                                     [0.0, 0.0]])
        np.testing.assert_array_equal(model.initial_belief.probs,
                                      [0.5, 0.5])
        self.assertEqual(validate(model), [])

    def test_costs_are_negated(self):
        text = HEADER.replace("reward", "cost") + """start: uniform
T: * : * : * 0.5
O: * : * : 0 1.0
R: 1 : 0 : * : * 3.5
"""
        model = import_interchange(text)
        self.assertEqual(model.reward[1, 0], -3.5)

    def test_named_entries(self):
        text = """discount: 0.95
states: ok broken
actions: wait fix
observations: quiet alarm
start: 1 0
T: wait : ok : broken 1.0
T: fix : * : ok 1.0
T: wait : broken : broken 1.0
O: * : ok : quiet 1.0
O: * : broken : alarm 1.0
"""
        model = import_interchange(text)
        self.assertEqual(model.state_names, ("ok", "broken"))
        self.assertEqual(model.transition[0][0, 1], 1.0)
        self.assertEqual(model.observation[1][1, 1], 1.0)

    def test_errors_carry_the_line(self):
        cases = [
            (HEADER + "T: 0 : 0 : 5 1.0\n", 6),
            (HEADER + "T: 0 : 0 : 1 often\n", 6),
            (HEADER + "R: 0 : 0 : 1 : * 2.0\n", 6),
            (HEADER + "\n\nZ: 0 : 0 1.0\n", 8),
            ("discount: 0.9\nT: 0 : 0 : 0 1.0\n", 2),
            (HEADER + "start: 0.5 0.3 0.2\n", 6),
            (HEADER.replace("0.9", "high"), 1),
        ]
        for text, lineno in cases:
            with self.assertRaises(InterchangeParseError) as context:
                import_interchange(text)
            self.assertEqual(context.exception.lineno, lineno, text)

    def test_missing_declaration(self):
        with self.assertRaises(InterchangeParseError):
            import_interchange("states: 2\nactions: 1\n")


if __name__ == "__main__":
    unittest.main()
