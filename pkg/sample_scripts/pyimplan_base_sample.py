# MIT License
#
# Copyright (c) 2024 pyimplan contributors

"""
Sample script runs an I&M planning experiment with the session class
`pyimplan.base.ImPlanningBase` and its function `command()`. The finite
horizon POMDP is solved, its policy simulated, and the heuristics optimized
for comparison.

1. experiment_info:
        Either name an experiment preset and override some of its keys [or]
        describe the experiment completely.

        experiment_info = {
            "preset": "R_RI50-R_FR20",
            "run_dir": "runs/exp3",
            "seed": 7
        }

        [OR]

        experiment_info = {
            "scheme": "DR_d15",
            "groups": "traditional",
            "costs": {
                "inspection": {"I": 2.0},
                "repair": {"perfect-repair": 40.0},
                "failure": 2000.0
            },
            "run_dir": "runs/custom"
        }

2. input file:
        The same dictionary can be read from the `experiment_info` section
        of a JSON/YAML file with
        `pyimplan.workflows.workflows_utils.get_experiment_from_file()`.
        Refer to sample_scripts/experiment.yaml.
"""

# Import the I&M planning session
from pyimplan.base import ImPlanningBase
from pprint import pprint

experiment_info = {
    "preset": "R_RI50-R_FR20",
    "run_dir": "runs/exp3",
    "seed": 7,
    "solver": {"time_budget": 60.0}
}
session = ImPlanningBase(experiment_info=experiment_info)

# Solve the time-augmented model and simulate its policy
bounds, trace = session.command("solve", finite=True)
print("Expected cost bounds at b0: [%.3f, %.3f]"
      % (-trace[-1].upper, -trace[-1].lower))
result = session.command("evaluate", finite=True)
print("Simulated E[C_T] = %.3f (+/- %.3f)" % (result.mean, result.ci))

# Best rule of every heuristic family
best = session.command("heuristics")
for family, (rule, cost) in best.items():
    pprint({"family": family, "rule": rule.describe(), "E[C_T]": cost.total})
