# MIT License
#
# Copyright (c) 2024 pyimplan contributors
#
# Licensed under the MIT License. See LICENSE in the project root.

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from typing import Tuple

import numpy as np

from pyimplan.base_utils import (console_logger, worker_count, substream,
                                 DegenerateConditioningError)
from pyimplan.constants import CRACK_GROWTH_DEFAULTS

logger = console_logger("FATIGUE_MODEL")

# Trajectories are drawn in fixed chunks, each with its own substream, so the
# merged result does not depend on the number of workers.
CHUNK_SIZE = 50000


@dataclass(frozen=True)
class CrackGrowthParams:
    """Random variables and deterministic constants of the crack growth law.

    lnC ~ Normal(lnC_mean, lnC_std), S ~ Normal(S_mean, S_std),
    d0 ~ Exponential(d0_mean), or fixed at d0_mean. A zero standard
    deviation pins the variable to its mean.
    """

    lnC_mean: float = CRACK_GROWTH_DEFAULTS["lnC_mean"]
    lnC_std: float = CRACK_GROWTH_DEFAULTS["lnC_std"]
    S_mean: float = CRACK_GROWTH_DEFAULTS["S_mean"]
    S_std: float = CRACK_GROWTH_DEFAULTS["S_std"]
    d0_mean: float = CRACK_GROWTH_DEFAULTS["d0_mean"]
    d0_distribution: str = CRACK_GROWTH_DEFAULTS["d0_distribution"]
    m: float = CRACK_GROWTH_DEFAULTS["m"]
    n: float = CRACK_GROWTH_DEFAULTS["n"]
    t_N: int = CRACK_GROWTH_DEFAULTS["t_N"]
    d_c: float = CRACK_GROWTH_DEFAULTS["d_c"]

    def __post_init__(self):
        if self.m == 2:
            raise ValueError("m = 2 makes the crack growth law singular")
        if self.d_c <= 0:
            raise ValueError("d_c must be positive, got %s" % self.d_c)
        if self.lnC_std < 0 or self.S_std < 0 or self.d0_mean <= 0:
            raise ValueError("standard deviations must be >= 0 and "
                             "d0_mean > 0")
        if self.d0_distribution not in ("exponential", "fixed"):
            raise ValueError("d0_distribution must be exponential or fixed")
        if int(self.t_N) < 1:
            raise ValueError("t_N must be >= 1")
        object.__setattr__(self, "t_N", int(self.t_N))

    @classmethod
    def from_dict(cls, overrides=None):
        names = {f.name for f in fields(cls)}
        unknown = set(overrides or {}) - names
        if unknown:
            raise ValueError("Unknown crack growth parameters %s"
                             % sorted(unknown))
        casts = {"t_N": int, "d0_distribution": str}
        return cls(**{k: casts.get(k, float)(v)
                      for k, v in (overrides or {}).items()})

    def k_from(self, C, S):
        """Grouped parameter K = C * S^m * pi^(m/2) * n."""
        return C * np.power(S, self.m) * np.pi ** (self.m / 2.0) * self.n

    @property
    def k_at_mean(self):
        return float(self.k_from(np.exp(self.lnC_mean), self.S_mean))

    def deterministic(self):
        """Copy with every random variable pinned to its mean."""
        return replace(self, lnC_std=0.0, S_std=0.0, d0_distribution="fixed")


@dataclass(frozen=True)
class PodCurve:
    """Probability of detection PoD(d) = F0 * (1 - exp(-d / scale))."""

    scale: float
    plateau: float = 1.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("PoD scale must be > 0")
        if not 0 < self.plateau <= 1:
            raise ValueError("PoD plateau must lie in (0, 1]")


@dataclass(frozen=True)
class PoiCurve:
    """Indicator curve built from detection boundaries of increasing scale.

    With boundaries PoD_1 >= ... >= PoD_k the indicator probabilities are
    1 - PoD_1, PoD_1 - PoD_2, ..., PoD_k.
    """

    boundaries: Tuple[PodCurve, ...] = field(default_factory=tuple)

    def __post_init__(self):
        boundaries = tuple(self.boundaries)
        if not boundaries:
            raise ValueError("PoI curve needs at least one boundary")
        scales = [b.scale for b in boundaries]
        plateaus = [b.plateau for b in boundaries]
        if any(b <= a for a, b in zip(scales, scales[1:])):
            raise ValueError("PoI boundary scales must strictly increase")
        if any(b > a for a, b in zip(plateaus, plateaus[1:])):
            raise ValueError("PoI boundary plateaus must not increase")
        object.__setattr__(self, "boundaries", boundaries)

    @classmethod
    def from_scales(cls, scales, plateau=1.0):
        return cls(tuple(PodCurve(float(s), plateau) for s in scales))


def make_curve(definition):
    """Build a PoD/PoI curve from a config entry such as
    ``{"type": "pod", "scale": 8}`` or ``{"type": "poi", "scales": [...]}``.
    """
    kind = definition.get("type", "pod")
    plateau = float(definition.get("plateau", 1.0))
    if kind == "pod":
        return PodCurve(float(definition["scale"]), plateau)
    if kind == "poi":
        return PoiCurve.from_scales(definition["scales"], plateau)
    raise ValueError("Unknown inspection curve type - %s" % kind)


def pod_eval(curve, d):
    """PoD at crack size `d` (scalar or array)."""
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValueError("crack size must be >= 0")
    value = curve.plateau * -np.expm1(-d / curve.scale)
    return float(value) if value.ndim == 0 else value


def poi_eval(curve, d):
    """Indicator probabilities at `d`; last axis has k + 1 entries."""
    d = np.asarray(d, dtype=float)
    pods = np.stack([np.asarray(pod_eval(b, d)) for b in curve.boundaries],
                    axis=-1)
    ones = np.ones(d.shape + (1,))
    zeros = np.zeros(d.shape + (1,))
    upper = np.concatenate([ones, pods], axis=-1)
    lower = np.concatenate([pods, zeros], axis=-1)
    return np.clip(upper - lower, 0.0, 1.0)


def num_outcomes(curve):
    if isinstance(curve, PoiCurve):
        return len(curve.boundaries) + 1
    return 2


def outcome_probabilities(curve, d):
    """(..., num_outcomes) likelihood table; outcome 0 is no detection."""
    if isinstance(curve, PoiCurve):
        return poi_eval(curve, d)
    pod = np.asarray(pod_eval(curve, d))
    return np.stack([1.0 - pod, pod], axis=-1)


def likelihood(curve, d, outcome):
    """Likelihood of one recorded inspection outcome at crack size `d`."""
    return outcome_probabilities(curve, d)[..., int(outcome)]


def grow_crack_k(params, d_t, K):
    """One year of crack growth written in the grouped parameter K.

    :param params: Crack growth parameters (m and d_c are read).
    :type params: class:`CrackGrowthParams`
    :param d_t: Current crack size(s) in mm, all > 0.
    :type d_t: float or class:`numpy.ndarray`
    :param K: Grouped parameter(s) C * S^m * pi^(m/2) * n.
    :type K: float or class:`numpy.ndarray`
    :raises ValueError: Some d_t <= 0.
    :return: Crack size(s) after one year, clamped at d_c.
    """
    d_t = np.asarray(d_t, dtype=float)
    if np.any(d_t <= 0):
        raise ValueError("crack growth needs d_t > 0")
    m = params.m
    exponent = 1.0 - m / 2.0
    base = exponent * np.asarray(K, dtype=float) + np.power(d_t, exponent)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        grown = np.where(base > 0, np.power(np.where(base > 0, base, 1.0),
                                            2.0 / (2.0 - m)),
                         params.d_c)
    grown = np.where((grown > params.d_c) | (d_t >= params.d_c)
                     | ~np.isfinite(grown), params.d_c, grown)
    return float(grown) if grown.ndim == 0 else grown


def grow_crack(params, d_t, C, S):
    """Paris-law recursion
    d_{t+1} = [(1 - m/2) C S^m pi^(m/2) n + d_t^(1 - m/2)]^(2 / (2 - m)).

    Returns d_c when the base is not positive or the result exceeds d_c.

    :raises ValueError: Some d_t <= 0.
    """
    return grow_crack_k(params, d_t, params.k_from(C, S))


def sample_parameters(params, num_samples, rng):
    """Draw (C, S, d0) for `num_samples` components."""
    lnC = rng.normal(params.lnC_mean, params.lnC_std, num_samples)
    S = rng.normal(params.S_mean, params.S_std, num_samples)
    # Negative stress ranges have negligible prior mass but break S^m.
    S = np.maximum(S, np.finfo(float).tiny)
    if params.d0_distribution == "fixed":
        d0 = np.full(num_samples, params.d0_mean)
    else:
        d0 = rng.exponential(params.d0_mean, num_samples)
    d0 = np.maximum(d0, np.finfo(float).tiny)
    return np.exp(lnC), S, d0


def sample_k_prior(params, num_samples, rng):
    """Prior draws of the grouped parameter K."""
    C, S, _ = sample_parameters(params, num_samples, rng)
    return params.k_from(C, S)


@dataclass(frozen=True)
class TrajectorySet:
    """Crack histories d(t), t = 0..t_N, one row per sample."""

    cracks: np.ndarray
    C: np.ndarray
    S: np.ndarray
    params: CrackGrowthParams

    def __len__(self):
        return self.cracks.shape[0]


def _simulate_chunk(params, count, seed, chunk_index):
    rng = substream(seed, chunk_index)
    C, S, d0 = sample_parameters(params, count, rng)
    K = params.k_from(C, S)
    cracks = np.empty((count, params.t_N + 1))
    cracks[:, 0] = np.minimum(d0, params.d_c)
    for t in range(params.t_N):
        cracks[:, t + 1] = grow_crack_k(params, cracks[:, t], K)
    return cracks, C, S


def _chunks(num_samples, chunk_size):
    starts = range(0, num_samples, chunk_size)
    return [(i, min(chunk_size, num_samples - start))
            for i, start in enumerate(starts)]


def sample_trajectories(params, num_samples, seed=0, num_workers=None,
                        chunk_size=CHUNK_SIZE):
    """Monte Carlo crack histories.

    Each sample draws (C, S, d0) once and iterates the growth law for t_N
    years. Results depend on `seed` only.

    :param params: Crack growth parameters.
    :type params: class:`CrackGrowthParams`
    :param num_samples: Number of trajectories, >= 1.
    :type num_samples: int
    :param seed: Root seed, defaults to 0.
    :type seed: int, optional
    :param num_workers: Thread pool size, defaults to PYIMPLAN_THREADS.
    :type num_workers: int, optional
    :return: Trajectory set.
    :rtype: class:`TrajectorySet`
    """
    if num_samples < 1:
        raise ValueError("num_samples must be >= 1")
    num_workers = num_workers or worker_count()
    jobs = _chunks(int(num_samples), chunk_size)
    with ThreadPoolExecutor(max_workers=num_workers) as pool:
        parts = list(pool.map(
            lambda job: _simulate_chunk(params, job[1], seed, job[0]), jobs))
    cracks = np.concatenate([p[0] for p in parts])
    C = np.concatenate([p[1] for p in parts])
    S = np.concatenate([p[2] for p in parts])
    logger.debug("Sampled %d crack trajectories (seed %s)"
                 % (num_samples, seed))
    return TrajectorySet(cracks, C, S, params)


def _weighted_failure_sums(cracks, inspections, params):
    """Per-year weighted failure mass and weight totals.

    Year t is weighted by the outcomes recorded at years <= t only, the
    same information a forward filter has at t.
    """
    by_year = {}
    for year, curve, outcome in inspections:
        if not 0 <= int(year) <= params.t_N:
            raise ValueError("inspection year %s outside 0..%d"
                             % (year, params.t_N))
        by_year.setdefault(int(year), []).append((curve, outcome))
    weights = np.ones(cracks.shape[0])
    failed_mass = np.empty(params.t_N + 1)
    totals = np.empty(params.t_N + 1)
    for t in range(params.t_N + 1):
        for curve, outcome in by_year.get(t, []):
            weights = weights * likelihood(curve, cracks[:, t], outcome)
        failed_mass[t] = weights @ (cracks[:, t] >= params.d_c)
        totals[t] = weights.sum()
    return failed_mass, totals, float((weights ** 2).sum())


def _failure_curve(failed_mass, totals, total_sq, min_ess):
    if totals[-1] <= 0:
        raise DegenerateConditioningError("All importance weights are zero")
    ess = totals[-1] ** 2 / total_sq
    if ess < min_ess:
        raise DegenerateConditioningError(
            "Effective sample size %.1f below the floor %.1f"
            % (ess, min_ess))
    return failed_mass / totals


def conditional_failure_curve(trajectories, inspections=(), min_ess=100.0):
    """Cumulative failure probability P_F(t | inspection outcomes).

    Each trajectory is weighted by the likelihood of the outcomes recorded
    up to year t.

    :param trajectories: Sampled crack histories.
    :type trajectories: class:`TrajectorySet`
    :param inspections: (year, curve, outcome) triples; outcome 0 means no\
        detection, 1 detection (or the indicator index for PoI curves).
    :type inspections: list, optional
    :param min_ess: Effective-sample-size floor, defaults to 100.
    :type min_ess: float, optional
    :raises DegenerateConditioningError: Weights collapsed.
    :return: P_F(t) for t = 0..t_N.
    :rtype: class:`numpy.ndarray`
    """
    inspections = list(inspections)
    sums = _weighted_failure_sums(trajectories.cracks, inspections,
                                  trajectories.params)
    return _failure_curve(*sums, min_ess if inspections else 0.0)


def reference_failure_curve(params, num_samples, seed=0, inspections=(),
                            min_ess=100.0, num_workers=None,
                            chunk_size=CHUNK_SIZE):
    """Streaming version of conditional_failure_curve for large references.

    Chunks are simulated, weighted and reduced one at a time; the draws are
    the same as sample_trajectories with the same seed and chunk size.
    """
    inspections = list(inspections)
    num_workers = num_workers or worker_count()

    def reduce_chunk(job):
        cracks, _, _ = _simulate_chunk(params, job[1], seed, job[0])
        return _weighted_failure_sums(cracks, inspections, params)

    jobs = _chunks(int(num_samples), chunk_size)
    with ThreadPoolExecutor(max_workers=num_workers) as pool:
        parts = list(pool.map(reduce_chunk, jobs))
    failed = np.sum([p[0] for p in parts], axis=0)
    totals = np.sum([p[1] for p in parts], axis=0)
    total_sq = float(np.sum([p[2] for p in parts]))
    curve = _failure_curve(failed, totals, total_sq,
                           min_ess if inspections else 0.0)
    logger.info("Reference failure curve from %d samples, P_F(t_N) = %.4g"
                % (num_samples, curve[-1]))
    return curve


def trajectories_to_rows(trajectories, limit=None):
    """CSV-ready rows (sample, C, S, d_0..d_tN)."""
    count = len(trajectories) if limit is None else min(limit,
                                                        len(trajectories))
    rows = []
    for i in range(count):
        row = {"sample": i, "C": trajectories.C[i], "S": trajectories.S[i]}
        for t, d in enumerate(trajectories.cracks[i]):
            row["d_%d" % t] = d
        rows.append(row)
    return rows
