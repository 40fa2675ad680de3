# MIT License
#
# Copyright (c) 2024 pyimplan contributors
#
# Licensed under the MIT License. See LICENSE in the project root.

"""Discrete-state deterioration DBNs.

Two layouts are supported. The parametric variant tracks (d, K) with joint
index ``k * num_d + d`` and a block-diagonal transition. The
deterioration-rate variant tracks (d, tau) with joint index
``tau * num_d + d``; every step moves tau to tau + 1.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
import scipy.sparse as sp
import yaml
from scipy.stats import truncexpon

from pyimplan.base_utils import (console_logger, worker_count, substream,
                                 ImpossibleEvidenceError)
from pyimplan.constants import (D_LOWER_PARAMETRIC, D_LOWER_RATE, K_LOWER,
                                K_UPPER, SCHEME_PRESETS, DBN_FORMAT_VERSION)
from pyimplan.fatigue_model import (CrackGrowthParams, grow_crack,
                                    grow_crack_k, outcome_probabilities,
                                    sample_k_prior, sample_trajectories)
from pyimplan.pomdp_core import BeliefState, filter_step

logger = console_logger("DISCRETIZATION")

PARAMETRIC = "parametric"
RATE = "deterioration-rate"

# Prior draws used to estimate K-cell masses and to sample K within a cell.
MIN_K_POOL = 200000


@dataclass(frozen=True, eq=False)
class DiscretizationScheme:
    """Interval boundaries of the discrete deterioration state.

    :param variant: "parametric" or "deterioration-rate".
    :type variant: str
    :param d_boundaries: {0, exp-spaced interior points, inf} in mm.
    :type d_boundaries: class:`numpy.ndarray`
    :param k_boundaries: {0, exp-spaced interior points, inf}, parametric only.
    :type k_boundaries: class:`numpy.ndarray`, optional
    :param tau_count: Number of deterioration rates t_N + 1, rate only.
    :type tau_count: int, optional
    """

    variant: str
    d_boundaries: np.ndarray
    k_boundaries: Optional[np.ndarray] = None
    tau_count: Optional[int] = None
    name: Optional[str] = None

    @property
    def num_d(self):
        return len(self.d_boundaries) - 1

    @property
    def num_k(self):
        return 0 if self.k_boundaries is None else len(self.k_boundaries) - 1

    @property
    def num_blocks(self):
        """Number of K cells or rates."""
        return self.num_k if self.variant == PARAMETRIC else self.tau_count

    @property
    def num_states(self):
        return self.num_d * self.num_blocks

    def index(self, d_cell, block):
        return block * self.num_d + d_cell


def _log_boundaries(lower, upper, size):
    interior = np.exp(np.linspace(np.log(lower), np.log(upper), size - 1))
    # Pin the ends so clamped values land exactly on the failure boundary.
    interior[0], interior[-1] = lower, upper
    return np.concatenate([[0.0], interior, [np.inf]])


def build_scheme(variant, sizes, params, name=None):
    """Exp-spaced interval boundaries for the chosen DBN variant.

    :param variant: "parametric" or "deterioration-rate".
    :type variant: str
    :param sizes: {"num_d": |S_d|, "num_k": |S_K|} interval counts.
    :type sizes: dict
    :param params: Crack growth parameters (d_c and t_N are read).
    :type params: class:`pyimplan.fatigue_model.CrackGrowthParams`
    :raises ValueError: Unknown variant or sizes below 3.
    :return: The scheme.
    :rtype: class:`DiscretizationScheme`
    """
    num_d = int(sizes.get("num_d", 0))
    if num_d < 3:
        raise ValueError("|S_d| must be >= 3, got %d" % num_d)
    if variant == PARAMETRIC:
        num_k = int(sizes.get("num_k") or 0)
        if num_k < 3:
            raise ValueError("parametric schemes need |S_K| >= 3, got %d"
                             % num_k)
        return DiscretizationScheme(
            PARAMETRIC,
            _log_boundaries(D_LOWER_PARAMETRIC, params.d_c, num_d),
            k_boundaries=_log_boundaries(K_LOWER, K_UPPER, num_k),
            name=name)
    if variant == RATE:
        return DiscretizationScheme(
            RATE, _log_boundaries(D_LOWER_RATE, params.d_c, num_d),
            tau_count=params.t_N + 1, name=name)
    raise ValueError("Unknown DBN variant - %s" % variant)


def cell_representatives(boundaries):
    """One point per interval: the geometric midpoint, the arithmetic
    midpoint for the first cell [0, b1) and the lower boundary for the
    unbounded top cell.
    """
    boundaries = np.asarray(boundaries, dtype=float)
    lower, upper = boundaries[:-1], boundaries[1:]
    with np.errstate(invalid="ignore"):
        reps = np.sqrt(lower * upper)
    reps[0] = upper[0] / 2.0
    reps[-1] = lower[-1]
    return reps


def digitize(values, boundaries):
    """Cell index of each value; cell i is [b_i, b_{i+1})."""
    return np.searchsorted(boundaries, values, side="right") - 1


def _d0_masses(boundaries, params):
    if params.d0_distribution == "fixed":
        masses = np.zeros(len(boundaries) - 1)
        masses[digitize(params.d0_mean, boundaries)] = 1.0
        return masses
    survival = np.exp(-np.asarray(boundaries) / params.d0_mean)
    return survival[:-1] - survival[1:]


@dataclass(frozen=True, eq=False)
class CompiledDbn:
    """Discrete deterioration model ready for filtering and POMDP assembly."""

    scheme: DiscretizationScheme
    params: CrackGrowthParams
    transition: sp.csr_matrix
    initial_belief: np.ndarray
    failure_states: np.ndarray
    report: dict = field(default_factory=dict)

    @property
    def num_states(self):
        return self.transition.shape[0]

    @property
    def variant(self):
        return self.scheme.variant

    @cached_property
    def transition_t(self):
        return self.transition.transpose().tocsr()

    @cached_property
    def damage(self):
        """Representative crack size of every joint state."""
        return np.tile(cell_representatives(self.scheme.d_boundaries),
                       self.scheme.num_blocks)

    @cached_property
    def block_of_state(self):
        """K-cell or rate index of every joint state."""
        return np.repeat(np.arange(self.scheme.num_blocks),
                         self.scheme.num_d)

    @cached_property
    def d_cell_of_state(self):
        return np.tile(np.arange(self.scheme.num_d), self.scheme.num_blocks)

    @cached_property
    def failure_mask(self):
        mask = np.zeros(self.num_states, dtype=bool)
        mask[self.failure_states] = True
        return mask


def _rate_transition(scheme, params, samples_per_cell, seed, num_workers):
    num_d, t_N = scheme.num_d, params.t_N
    fail = num_d - 1
    trajectories = sample_trajectories(params, samples_per_cell * num_d,
                                       seed=seed, num_workers=num_workers)
    cells = digitize(trajectories.cracks, scheme.d_boundaries)
    reps = cell_representatives(scheme.d_boundaries)
    mean_C, mean_S = np.exp(params.lnC_mean), params.S_mean

    rows, cols, vals = [], [], []
    flagged = []

    def put(s, targets, probs):
        rows.extend([s] * len(targets))
        cols.extend(targets)
        vals.extend(probs)

    row_samples = np.zeros((scheme.tau_count, num_d), dtype=np.int64)
    for tau in range(t_N):
        counts = np.bincount(cells[:, tau] * num_d + cells[:, tau + 1],
                             minlength=num_d * num_d).reshape(num_d, num_d)
        row_samples[tau] = counts.sum(axis=1)
        for i in range(num_d):
            s = scheme.index(i, tau)
            if i == fail:
                put(s, [s], [1.0])
                continue
            total = row_samples[tau, i]
            if total == 0:
                grown = grow_crack(params, reps[i], mean_C, mean_S)
                target = int(digitize(grown, scheme.d_boundaries))
                flagged.append([tau, i])
                put(s, [scheme.index(target, tau + 1)], [1.0])
                continue
            targets = np.flatnonzero(counts[i])
            put(s, scheme.index(targets, tau + 1).tolist(),
                (counts[i, targets] / total).tolist())
    for i in range(num_d):
        s = scheme.index(i, t_N)
        put(s, [s], [1.0])

    size = scheme.num_states
    matrix = sp.csr_matrix((vals, (rows, cols)), shape=(size, size))
    initial = np.zeros(size)
    initial[:num_d] = _d0_masses(scheme.d_boundaries, params)
    report = {"trajectories": int(samples_per_cell * num_d),
              "flagged_cells": flagged,
              "min_row_samples": int(row_samples[:t_N, :fail].min())}
    return matrix, initial, report


def _d_samples(scheme, params, count, rng):
    """(num_d - 1, count) crack sizes drawn inside every non-failure cell.

    The first cell uses the prior d0 truncated to [0, b1); the others are
    log-uniform within the cell.
    """
    bounds = scheme.d_boundaries
    samples = np.empty((scheme.num_d - 1, count))
    samples[0] = truncexpon.rvs(bounds[1] / params.d0_mean,
                                scale=params.d0_mean, size=count,
                                random_state=rng)
    samples[0] = np.maximum(samples[0], np.finfo(float).tiny)
    low = np.log(bounds[1:-2])
    high = np.log(bounds[2:-1])
    samples[1:] = np.exp(rng.uniform(low[:, None], high[:, None],
                                     (len(low), count)))
    return samples


def _parametric_block(scheme, params, k_values, count, seed, k_cell):
    num_d = scheme.num_d
    rng = substream(seed, 1, k_cell)
    K = rng.choice(k_values, size=count, replace=True)
    grown = grow_crack_k(params, _d_samples(scheme, params, count, rng),
                         K[None, :])
    targets = digitize(grown, scheme.d_boundaries)
    origins = np.repeat(np.arange(num_d - 1), count)
    counts = np.bincount(origins * num_d + targets.ravel(),
                         minlength=(num_d - 1) * num_d)
    return counts.reshape(num_d - 1, num_d) / float(count)


def _parametric_transition(scheme, params, samples_per_cell, seed,
                           num_workers):
    num_d, num_k = scheme.num_d, scheme.num_k
    pool_size = max(samples_per_cell * num_k, MIN_K_POOL)
    pool = sample_k_prior(params, pool_size, substream(seed, 0))
    pool_cells = digitize(pool, scheme.k_boundaries)
    k_masses = np.bincount(pool_cells, minlength=num_k) / float(pool_size)
    k_reps = cell_representatives(scheme.k_boundaries)

    flagged = []
    candidates = []
    for j in range(num_k):
        members = pool[pool_cells == j]
        if members.size == 0:
            flagged.append(j)
            members = np.array([k_reps[j]])
        candidates.append(members)

    def block(j):
        return _parametric_block(scheme, params, candidates[j],
                                 samples_per_cell, seed, j)

    with ThreadPoolExecutor(max_workers=num_workers) as executor:
        blocks = list(executor.map(block, range(num_k)))

    fail_row = np.zeros((1, num_d))
    fail_row[0, -1] = 1.0
    matrix = sp.block_diag([sp.csr_matrix(np.vstack([b, fail_row]))
                            for b in blocks], format="csr")
    initial = np.outer(k_masses, _d0_masses(scheme.d_boundaries,
                                            params)).ravel()
    report = {"k_pool": int(pool_size), "flagged_k_cells": flagged}
    return matrix, initial, report


def compile_transition(scheme, params, samples_per_cell=10000, seed=0,
                       num_workers=None):
    """Estimate the do-nothing transition of the discrete DBN.

    Parametric: for every (d-cell, K-cell) draw d within the cell and K from
    its prior truncated to the cell, grow one year and count the target
    cells; K never changes. Rate: sample crack histories and count the
    d-cell moves between year tau and tau + 1; rows never visited at rate
    tau map the cell representative through the mean-parameter growth and
    are flagged in the report. Failure cells and tau = t_N absorb.

    :param scheme: Discretization scheme.
    :type scheme: class:`DiscretizationScheme`
    :param params: Crack growth parameters.
    :type params: class:`pyimplan.fatigue_model.CrackGrowthParams`
    :param samples_per_cell: Samples per parametric row, or trajectories\
        per d-cell for the rate variant, defaults to 10000.
    :type samples_per_cell: int, optional
    :param seed: Root seed, defaults to 0.
    :type seed: int, optional
    :return: The compiled model with its build report.
    :rtype: class:`CompiledDbn`
    """
    num_workers = num_workers or worker_count()
    if scheme.variant == PARAMETRIC:
        matrix, initial, report = _parametric_transition(
            scheme, params, samples_per_cell, seed, num_workers)
    else:
        matrix, initial, report = _rate_transition(
            scheme, params, samples_per_cell, seed, num_workers)

    failure = np.arange(scheme.num_blocks) * scheme.num_d + scheme.num_d - 1
    report.update({"scheme": scheme.name, "variant": scheme.variant,
                   "num_states": int(scheme.num_states),
                   "samples_per_cell": int(samples_per_cell),
                   "seed": int(seed)})
    flagged = report.get("flagged_cells") or report.get("flagged_k_cells")
    if flagged:
        logger.warning("%d cells had no conditioning samples and use the "
                       "fallback mapping" % len(flagged))
    logger.info("Compiled %s DBN with %d states (%d non-zeros)"
                % (scheme.variant, scheme.num_states, matrix.nnz))
    return CompiledDbn(scheme, params, matrix, initial, failure, report)


def compile_named_scheme(name, params, samples_per_cell=10000, seed=0,
                         num_workers=None):
    """Build and compile one of the SCHEME_PRESETS, e.g. "DR_d30"."""
    if name not in SCHEME_PRESETS:
        raise KeyError("Unknown discretization scheme - %s" % name)
    preset = SCHEME_PRESETS[name]
    scheme = build_scheme(preset["variant"], preset, params, name=name)
    return compile_transition(scheme, params, samples_per_cell, seed,
                              num_workers)


def likelihood_matrix(dbn, curve):
    """(num_states, num_outcomes) inspection likelihood per joint state."""
    return outcome_probabilities(curve, dbn.damage)


def forward_step(dbn, belief, evidence=None):
    """One year of filtering: transition, then optional Bayes correction.

    :param dbn: Compiled model.
    :type dbn: class:`CompiledDbn`
    :param belief: Current belief.
    :type belief: class:`pyimplan.pomdp_core.BeliefState`
    :param evidence: (likelihood matrix, outcome index) or None.
    :type evidence: tuple, optional
    :raises ImpossibleEvidenceError: Evidence leaves no posterior mass.
    :return: Filtered belief.
    :rtype: class:`pyimplan.pomdp_core.BeliefState`
    """
    probs = belief.probs if isinstance(belief, BeliefState) else belief
    column = None
    if evidence is not None:
        matrix, outcome = evidence
        column = np.asarray(matrix)[:, int(outcome)]
    mass, normalizer = filter_step(dbn.transition_t, probs, column)
    if normalizer <= 0:
        raise ImpossibleEvidenceError("Evidence has zero probability under "
                                      "the current belief")
    posterior = mass / normalizer
    return BeliefState(posterior / posterior.sum())


def condition(belief, evidence):
    """Bayes correction without a transition (evidence at year 0)."""
    matrix, outcome = evidence
    mass = belief.probs * np.asarray(matrix)[:, int(outcome)]
    total = mass.sum()
    if total <= 0:
        raise ImpossibleEvidenceError("Evidence has zero probability under "
                                      "the current belief")
    return BeliefState(mass / total)


def failure_probability(dbn, belief):
    """Marginal mass of the failure cells."""
    probs = belief.probs if isinstance(belief, BeliefState) else belief
    return float(probs[dbn.failure_states].sum())


def expected_damage(dbn, belief):
    """E[d] under `belief` using the cell representatives."""
    probs = belief.probs if isinstance(belief, BeliefState) else belief
    return float(probs @ dbn.damage)


def unroll_failure_curve(dbn, inspections=()):
    """P_F(t), t = 0..t_N, filtering the recorded inspection outcomes.

    :param inspections: (year, curve, outcome) triples.
    :type inspections: list, optional
    :return: Cumulative failure probability per year.
    :rtype: class:`numpy.ndarray`
    """
    t_N = dbn.params.t_N
    evidence = {}
    for year, curve, outcome in inspections:
        if not 0 <= int(year) <= t_N:
            raise ValueError("inspection year %s outside 0..%d"
                             % (year, t_N))
        evidence.setdefault(int(year), []).append(
            (likelihood_matrix(dbn, curve), outcome))

    belief = BeliefState(dbn.initial_belief)
    for item in evidence.get(0, []):
        belief = condition(belief, item)
    curve = np.empty(t_N + 1)
    curve[0] = failure_probability(dbn, belief)
    for t in range(1, t_N + 1):
        items = evidence.get(t, [])
        belief = forward_step(dbn, belief, items[0] if items else None)
        for item in items[1:]:
            belief = condition(belief, item)
        curve[t] = failure_probability(dbn, belief)
    return curve


def discretization_error(dbn_curve, mcs_curve):
    """Squared distance between the standardized failure curves.

    Both curves are standardized with the mean and standard deviation of
    the Monte Carlo curve.

    :raises ValueError: Lengths differ or the Monte Carlo curve is constant.
    :rtype: float
    """
    dbn_curve = np.asarray(dbn_curve, dtype=float)
    mcs_curve = np.asarray(mcs_curve, dtype=float)
    if dbn_curve.shape != mcs_curve.shape:
        raise ValueError("curves differ in length: %d vs %d"
                         % (dbn_curve.size, mcs_curve.size))
    mean, std = mcs_curve.mean(), mcs_curve.std()
    if std == 0:
        raise ValueError("reference curve has zero standard deviation")
    return float(np.sum(((mcs_curve - mean) / std
                         - (dbn_curve - mean) / std) ** 2))


def save_dbn(dbn, path):
    """Write `dbn` to a versioned .npz container and a YAML build report.

    :return: Paths of the container and the report.
    :rtype: tuple
    """
    base, _ = os.path.splitext(path)
    matrix = dbn.transition.tocsr()
    np.savez_compressed(
        base + ".npz",
        format_version=DBN_FORMAT_VERSION,
        variant=dbn.scheme.variant,
        name=dbn.scheme.name or "",
        d_boundaries=dbn.scheme.d_boundaries,
        k_boundaries=(dbn.scheme.k_boundaries if dbn.scheme.k_boundaries
                      is not None else np.zeros(0)),
        tau_count=dbn.scheme.tau_count or 0,
        data=matrix.data, indices=matrix.indices, indptr=matrix.indptr,
        shape=np.array(matrix.shape),
        initial_belief=dbn.initial_belief,
        failure_states=dbn.failure_states,
        params=yaml.safe_dump(asdict(dbn.params)))
    with open(base + ".yaml", "w") as fp:
        yaml.safe_dump(dbn.report, fp, default_flow_style=None)
    return base + ".npz", base + ".yaml"


def load_dbn(path):
    """Read a container written by :func:`save_dbn`."""
    base, _ = os.path.splitext(path)
    with np.load(base + ".npz", allow_pickle=False) as data:
        version = int(data["format_version"])
        if version != DBN_FORMAT_VERSION:
            raise ValueError("Unsupported DBN container version %d" % version)
        variant = str(data["variant"])
        scheme = DiscretizationScheme(
            variant, data["d_boundaries"],
            k_boundaries=(data["k_boundaries"] if variant == PARAMETRIC
                          else None),
            tau_count=int(data["tau_count"]) or None,
            name=str(data["name"]) or None)
        matrix = sp.csr_matrix((data["data"], data["indices"],
                                data["indptr"]), shape=tuple(data["shape"]))
        params = CrackGrowthParams(**yaml.safe_load(str(data["params"])))
        initial = np.array(data["initial_belief"])
        failure = np.array(data["failure_states"])
    report = {}
    if os.path.exists(base + ".yaml"):
        with open(base + ".yaml") as fp:
            report = yaml.safe_load(fp) or {}
    return CompiledDbn(scheme, params, matrix, initial, failure, report)
