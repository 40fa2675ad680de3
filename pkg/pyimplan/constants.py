# MIT License
#
# Copyright (c) 2024 pyimplan contributors
#
# Licensed under the MIT License. See LICENSE in the project root.

MAINTENANCE_TYPES = ["do-nothing", "perfect-repair", "minor-repair"]

# Action severity used by observation-based maintenance rules. A more severe
# indicator never maps to a less severe action.
MAINTENANCE_SEVERITY = {
    "do-nothing": 0,
    "minor-repair": 1,
    "perfect-repair": 2
}

DBN_VARIANTS = ["parametric", "deterioration-rate"]

# Fatigue crack growth random variables and deterministic constants.
CRACK_GROWTH_DEFAULTS = {
    "lnC_mean": -35.2,
    "lnC_std": 0.5,
    "S_mean": 70.0,
    "S_std": 10.0,
    "d0_mean": 1.0,
    "d0_distribution": "exponential",
    "m": 3.5,
    "n": 1.0e6,
    "t_N": 30,
    "d_c": 20.0
}

# Lower end of the exp-spaced interior boundaries. The upper end is d_c for
# damage and 1 for K.
D_LOWER_PARAMETRIC = 1.0e-1
D_LOWER_RATE = 1.0e-4
K_LOWER = 1.0e-5
K_UPPER = 1.0

# Named discretization schemes. Sizes are interval counts.
SCHEME_PRESETS = {
    "DR_d15": {"variant": "deterioration-rate", "num_d": 15},
    "DR_d30": {"variant": "deterioration-rate", "num_d": 30},
    "PAR_K50-d40": {"variant": "parametric", "num_d": 40, "num_k": 50},
    "PAR_K50-d80": {"variant": "parametric", "num_d": 80, "num_k": 50},
    "PAR_K50-d160": {"variant": "parametric", "num_d": 160, "num_k": 50},
    "PAR_K100-d80": {"variant": "parametric", "num_d": 80, "num_k": 100},
    "PAR_K100-d160": {"variant": "parametric", "num_d": 160, "num_k": 100}
}

# Inspection quality catalogue. "pod" curves report detection/no-detection,
# "poi" curves report one of len(scales) + 1 indicators.
INSPECTION_PRESETS = {
    "I": {"type": "pod", "scale": 8.0},
    "I1": {"type": "pod", "scale": 8.0},
    "I2": {"type": "poi", "scales": [4.0, 7.0, 10.0, 13.0]}
}

TRADITIONAL_GROUPS = [
    {"name": "DN-NI", "maintenance": "do-nothing", "inspection": None},
    {"name": "DN-I", "maintenance": "do-nothing", "inspection": "I"},
    {"name": "PR-NI", "maintenance": "perfect-repair", "inspection": None}
]

COMPLEX_GROUPS = [
    {"name": "DN-NI", "maintenance": "do-nothing", "inspection": None},
    {"name": "DN-I1", "maintenance": "do-nothing", "inspection": "I1"},
    {"name": "DN-I2", "maintenance": "do-nothing", "inspection": "I2"},
    {"name": "mRP-NI", "maintenance": "minor-repair", "inspection": None},
    {"name": "mRP-I1", "maintenance": "minor-repair", "inspection": "I1"},
    {"name": "mRP-I2", "maintenance": "minor-repair", "inspection": "I2"},
    {"name": "pRP-NI", "maintenance": "perfect-repair", "inspection": None}
]

GROUP_PRESETS = {
    "traditional": TRADITIONAL_GROUPS,
    "complex": COMPLEX_GROUPS
}

THRESHOLD_GRID = [1.0e-4, 2.0e-4, 3.0e-4, 5.0e-4, 7.0e-4, 1.0e-3, 1.5e-3,
                  2.0e-3, 3.0e-3, 5.0e-3, 1.0e-2]

TRADITIONAL_HEURISTICS = {
    "families": [
        {"name": "EQ-INS", "plan": "equidistant", "inspection": "I",
         "maintenance": "repair-on-detection"},
        {"name": "THR-INS", "plan": "threshold", "inspection": "I",
         "maintenance": "repair-on-detection"}
    ],
    "intervals": list(range(1, 31)),
    "thresholds": THRESHOLD_GRID,
    "grid_episodes": 2000
}

COMPLEX_HEURISTICS = {
    "families": [
        {"name": "EQ-INS1", "plan": "equidistant", "inspection": "I1",
         "maintenance": "observation-map"},
        {"name": "EQ-INS2", "plan": "equidistant", "inspection": "I2",
         "maintenance": "observation-map"},
        {"name": "THR-INS1", "plan": "threshold", "inspection": "I1",
         "maintenance": "observation-map"},
        {"name": "THR-INS2", "plan": "threshold", "inspection": "I2",
         "maintenance": "observation-map"},
        {"name": "THR-INS2-PF", "plan": "threshold", "inspection": "I2",
         "maintenance": "pf-threshold", "action": "perfect-repair"},
        {"name": "THR-INS2-ED", "plan": "threshold", "inspection": "I2",
         "maintenance": "ed-threshold", "action": "perfect-repair"}
    ],
    "intervals": list(range(2, 16)),
    "thresholds": [5.0e-4, 1.0e-3, 1.5e-3, 2.0e-3],
    "pf_thresholds": [5.0e-3, 1.0e-2, 2.2e-2, 5.0e-2],
    "ed_thresholds": [2.0, 4.0, 6.0, 8.0],
    "repair_actions": ["do-nothing", "minor-repair", "perfect-repair"],
    "grid_episodes": 1000
}

EXPERIMENT_PRESETS = {
    "R_RI20-R_FR100": {
        "scheme": "DR_d30",
        "groups": "traditional",
        "costs": {"inspection": {"I": 5.0},
                  "repair": {"perfect-repair": 100.0},
                  "failure": 1.0e4,
                  "calibrate_discount": True},
        "heuristics": TRADITIONAL_HEURISTICS
    },
    "R_RI10-R_FR10": {
        "scheme": "DR_d30",
        "groups": "traditional",
        "costs": {"inspection": {"I": 1.0},
                  "repair": {"perfect-repair": 10.0},
                  "failure": 1.0e2,
                  "calibrate_discount": True},
        "heuristics": TRADITIONAL_HEURISTICS
    },
    "R_RI50-R_FR20": {
        "scheme": "DR_d30",
        "groups": "traditional",
        "costs": {"inspection": {"I": 1.0},
                  "repair": {"perfect-repair": 50.0},
                  "failure": 1.0e3,
                  "calibrate_discount": True},
        "heuristics": TRADITIONAL_HEURISTICS,
        "compare_perseus": True,
        "compare_focused": True,
        "compare_schemes": ["PAR_K100-d160"]
    },
    "complex": {
        "scheme": "DR_d30",
        "groups": "complex",
        "costs": {"inspection": {"I1": 1.0, "I2": 2.0},
                  "repair": {"minor-repair": 10.0,
                             "perfect-repair": 50.0},
                  "failure": 1.0e3,
                  "calibrate_discount": True},
        "heuristics": COMPLEX_HEURISTICS,
        "compare_focused": True
    },
    "discretization": {
        "scheme": "DR_d30",
        "groups": "traditional",
        "costs": {"inspection": {"I": 1.0},
                  "repair": {"perfect-repair": 10.0},
                  "failure": 1.0e2,
                  "calibrate_discount": True},
        "schemes": list(SCHEME_PRESETS.keys()),
        "conditioning": [{"year": 18, "inspection": "I", "outcome": 0},
                         {"year": 25, "inspection": "I", "outcome": 0}]
    }
}

# Discount calibration: no-inspection analytic cost at C_f = 100.
CALIBRATION_FAILURE_COST = 100.0
CALIBRATION_TARGET = 2.25
CALIBRATION_BRACKET = (0.5, 1.0)

SOLVER_DEFAULTS = {
    "time_budget": 120.0,
    "target_gap": 1.0e-3,
    "target_gap_relative": 1.0e-4,
    "max_belief_points": 20000,
    "sampling_strategy": "gap-driven",
    "backup_batch": 64,
    "prune_tolerance": 1.0e-9,
    "max_trials": None,
    "max_depth": 200,
    "perseus_beliefs": 1000,
    "seed_heuristics": True,
    "plan_vectors": 256,
    "seed": 0
}

SAMPLING_STRATEGIES = ["gap-driven", "focused-depth", "random-reachable"]

FAILURE_ACCRUAL_MODES = ["belief", "sampled"]

DBN_FORMAT_VERSION = 1
POLICY_FORMAT_VERSION = 1
