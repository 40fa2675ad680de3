# MIT License
#
# Copyright (c) 2024 pyimplan contributors

"""
Sample script uses the pyimplan modules directly, without the session class.
A deterioration-rate DBN is compiled, the traditional inspection and repair
groups are assembled into an infinite-horizon POMDP, the POMDP is solved and
its policy simulated next to an equidistant inspection heuristic.

1. Deterioration model:
        `pyimplan.fatigue_model.CrackGrowthParams` holds the crack growth
        random variables. Override any of them, e.g. a shorter design life.

        params = CrackGrowthParams.from_dict({"t_N": 20})

2. Costs:
        `pyimplan.im_builder.CostSpec` holds the inspection, repair and
        failure costs and the discount factor.
"""

from pyimplan.constants import INSPECTION_PRESETS, TRADITIONAL_GROUPS
from pyimplan.discretization_dbn import compile_named_scheme
from pyimplan.fatigue_model import CrackGrowthParams
from pyimplan.im_builder import CostSpec, make_groups, assemble_infinite
from pyimplan.pbvi_solver import SolverConfig, solve, extract_policy
from pyimplan.policy_eval import simulate_policy
from pyimplan.rbi_heuristics import (HeuristicRule, InspectionPlan,
                                     evaluate_simulated)

params = CrackGrowthParams.from_dict({"t_N": 20})
dbn = compile_named_scheme("DR_d15", params, samples_per_cell=2000, seed=1)

costs = CostSpec.from_dict({"inspection": {"I": 1.0},
                            "repair": {"perfect-repair": 50.0},
                            "failure": 1000.0,
                            "discount": 0.95})
groups = make_groups(TRADITIONAL_GROUPS, INSPECTION_PRESETS, costs)
model = assemble_infinite(dbn, groups, costs)

bounds, trace = solve(model, SolverConfig(time_budget=30.0))
policy = extract_policy(bounds)
pomdp = simulate_policy(model, policy, 2000, params.t_N, seed=1,
                        groups=groups, failure_cost=costs.failure)

rule = HeuristicRule("EQ-INS", InspectionPlan(
    "equidistant", "I", groups[1].curve, interval=5))
heuristic = evaluate_simulated(model, groups, rule, costs, 2000, params.t_N,
                               seed=1)

print("POMDP policy:  E[C_T] = %.3f (+/- %.3f)" % (pomdp.mean, pomdp.ci))
print("EQ-INS (5 y):  E[C_T] = %.3f (+/- %.3f)"
      % (heuristic.mean, heuristic.ci))
