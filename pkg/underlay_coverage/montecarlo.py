"""
Monte Carlo oracle for the four coverage probabilities.

Trials are drawn in fixed blocks; block ``i`` owns the random stream
``SeedSequence(seed, spawn_key=(i,))``, so a given ``(seed, n_trials)`` always
produces the same trials whether the blocks run in one process or many.
Success counts are integers, which makes the pooled estimate exact and
independent of the worker count.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from numpy.typing import NDArray

from .analytic import Metric
from .channel import aerial_path_gain, p_los, sample_fading
from .geometry import GroundPoint, sample_asd_positions, sample_tsue_positions
from .params import AerialEnvironment, SystemParams
from .power import asd_tx_power

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]
BoolArray = NDArray[np.bool_]

BLOCK_SIZE = 65536
DEFAULT_TRIALS = 1_000_000
_Z95 = 1.96


@dataclass(frozen=True)
class LinkSample:
    """Joint realisation(s) of every random quantity in the four SINRs.

    Fields are arrays of equal length, one entry per trial. ``los_d`` is the
    AsD-ABS link state, ``los_c`` the TsUE-ABS one (``True`` for LOS). ``H_*``
    are terrestrial Rayleigh gains, ``G_*`` aerial Nakagami gains.
    """

    asd_x: FloatArray
    asd_y: FloatArray
    tsue_x: FloatArray
    tsue_y: FloatArray
    z_d: FloatArray
    z_c: FloatArray
    d_A: FloatArray
    d_T: FloatArray
    los_d: BoolArray
    los_c: BoolArray
    H_u_T: FloatArray
    H_u_A: FloatArray
    H_d_T: FloatArray
    H_d_A: FloatArray
    G_u_A: FloatArray
    G_u_T: FloatArray
    G_d_T: FloatArray
    G_d_A: FloatArray
    p_asd: FloatArray

    def __len__(self) -> int:
        return int(self.z_d.size)

    def asd_pos(self, i: int = 0) -> GroundPoint:
        return GroundPoint(float(self.asd_x[i]), float(self.asd_y[i]))

    def tsue_pos(self, i: int = 0) -> GroundPoint:
        return GroundPoint(float(self.tsue_x[i]), float(self.tsue_y[i]))


@dataclass(frozen=True)
class McEstimate:
    mean: float
    half_width_95: float
    n_trials: int
    seed: int

    @classmethod
    def from_counts(cls, successes: int, n_trials: int, seed: int) -> "McEstimate":
        mean = successes / n_trials
        return cls(mean, _Z95 * math.sqrt(mean * (1.0 - mean) / n_trials), n_trials, seed)

    @property
    def std_error(self) -> float:
        return self.half_width_95 / _Z95


def _aerial_fading(p: SystemParams, rng: np.random.Generator, los: BoolArray, faded: bool) -> FloatArray:
    if not faded:
        return np.ones(los.size)
    return sample_fading(p, rng, los)


def simulate_batch(
    p: SystemParams, env: AerialEnvironment, rng: np.random.Generator, n: int, faded: bool = True
) -> LinkSample:
    """Draw ``n`` independent trials. ``faded=False`` pins the aerial gains to 1."""
    asd_x, asd_y = sample_asd_positions(p, rng, n)
    tsue_x, tsue_y = sample_tsue_positions(p, rng, n)

    z_d = np.sqrt(asd_x**2 + asd_y**2 + p.h**2)
    z_c = np.sqrt(tsue_x**2 + tsue_y**2 + p.h**2)
    d_A = np.hypot(asd_x - p.d, asd_y)
    d_T = np.hypot(tsue_x - p.d, tsue_y)

    los_d = rng.random(n) < p_los(env, p.h, z_d)
    los_c = rng.random(n) < p_los(env, p.h, z_c)

    H_u_T, H_u_A, H_d_T, H_d_A = (sample_fading(p, rng, size=n) for _ in range(4))

    G_u_A = _aerial_fading(p, rng, los_d, faded)
    G_u_T = _aerial_fading(p, rng, los_c, faded)
    G_d_T = _aerial_fading(p, rng, los_c, faded)
    G_d_A = _aerial_fading(p, rng, los_d, faded)

    return LinkSample(
        asd_x=asd_x, asd_y=asd_y, tsue_x=tsue_x, tsue_y=tsue_y,
        z_d=z_d, z_c=z_c, d_A=d_A, d_T=d_T,
        los_d=los_d, los_c=los_c,
        H_u_T=H_u_T, H_u_A=H_u_A, H_d_T=H_d_T, H_d_A=H_d_A,
        G_u_A=G_u_A, G_u_T=G_u_T, G_d_T=G_d_T, G_d_A=G_d_A,
        p_asd=asd_tx_power(los_d, z_d, p),
    )


def simulate_trial(p: SystemParams, env: AerialEnvironment, rng: np.random.Generator) -> LinkSample:
    return simulate_batch(p, env, rng, 1)


def link_sinr(sample: LinkSample, metric: Metric, p: SystemParams) -> FloatArray:
    """Per-trial SINR of one link."""
    with np.errstate(divide="ignore"):
        terrestrial_a = sample.d_A ** (-p.alpha_b)
    if metric is Metric.TBS_UL:
        interference = sample.p_asd * sample.H_u_A * terrestrial_a
        return p.rho_b * sample.H_u_T / (interference + p.sigma2)
    if metric is Metric.ABS_UL:
        tsue_power = p.rho_b * sample.d_T**p.alpha_b
        signal = sample.p_asd * sample.G_u_A * aerial_path_gain(sample.los_d, sample.z_d, p)
        interference = tsue_power * sample.G_u_T * aerial_path_gain(sample.los_c, sample.z_c, p)
        return signal / (interference + p.sigma2)
    if metric is Metric.TSUE_DL:
        with np.errstate(divide="ignore"):
            signal = p.P_t * sample.H_d_T * sample.d_T ** (-p.alpha_b)
        interference = p.P_a * sample.G_d_T * aerial_path_gain(sample.los_c, sample.z_c, p)
        return signal / (interference + p.sigma2)
    signal = p.P_a * sample.G_d_A * aerial_path_gain(sample.los_d, sample.z_d, p)
    interference = p.P_t * sample.H_d_A * terrestrial_a
    return signal / (interference + p.sigma2)


def _block_sizes(n_trials: int) -> list[int]:
    full, rest = divmod(n_trials, BLOCK_SIZE)
    return [BLOCK_SIZE] * full + ([rest] if rest else [])


def block_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def _count_block(
    args: tuple[SystemParams, AerialEnvironment, tuple[Metric, ...], int, int, int, bool],
) -> list[int]:
    p, env, metrics, seed, index, size, faded = args
    sample = simulate_batch(p, env, block_rng(seed, index), size, faded)
    return [int(np.count_nonzero(link_sinr(sample, metric, p) > metric.threshold(p))) for metric in metrics]


def _run_blocks(jobs: list[tuple], workers: int, func) -> list:
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(func, jobs))
    return [func(job) for job in jobs]


def estimate_many(
    metrics: Iterable[Metric | str],
    p: SystemParams,
    env: AerialEnvironment,
    n_trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    faded: bool = True,
    workers: int = 1,
) -> dict[Metric, McEstimate]:
    """Estimate several metrics from one shared set of trials."""
    if n_trials < 1:
        raise ValueError(f"n_trials must be >= 1, got {n_trials}")
    metrics = tuple(dict.fromkeys(Metric.parse(m) for m in metrics))
    jobs = [
        (p, env, metrics, seed, index, size, faded)
        for index, size in enumerate(_block_sizes(n_trials))
    ]
    counts = _run_blocks(jobs, workers, _count_block)
    totals = [sum(block[i] for block in counts) for i in range(len(metrics))]
    logger.debug("MC %s trials=%d seed=%d faded=%s -> %s", env.label, n_trials, seed, faded, totals)
    return {metric: McEstimate.from_counts(total, n_trials, seed) for metric, total in zip(metrics, totals)}


def estimate_coverage(
    metric: Metric | str,
    p: SystemParams,
    env: AerialEnvironment,
    n_trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    workers: int = 1,
) -> McEstimate:
    metric = Metric.parse(metric)
    return estimate_many([metric], p, env, n_trials, seed, True, workers)[metric]


def estimate_no_fading(
    metric: Metric | str,
    p: SystemParams,
    env: AerialEnvironment,
    n_trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    workers: int = 1,
) -> McEstimate:
    """Coverage with the aerial Nakagami gains removed; terrestrial Rayleigh fading stays."""
    metric = Metric.parse(metric)
    return estimate_many([metric], p, env, n_trials, seed, False, workers)[metric]


def _laplace_block(args: tuple[float, SystemParams, AerialEnvironment, int, int, int]) -> tuple[float, float]:
    s, p, env, seed, index, size = args
    sample = simulate_batch(p, env, block_rng(seed, index), size)
    with np.errstate(divide="ignore"):
        interference = sample.p_asd * sample.H_u_A * sample.d_A ** (-p.alpha_b)
    values = np.exp(-s * interference)
    return float(values.sum()), float(np.square(values).sum())


def estimate_laplace_tbs(
    s: float,
    p: SystemParams,
    env: AerialEnvironment,
    n_trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    workers: int = 1,
) -> tuple[float, float]:
    """Sample mean and standard error of ``exp(-s I)`` for the AsD interference at the TBS."""
    jobs = [(s, p, env, seed, index, size) for index, size in enumerate(_block_sizes(n_trials))]
    sums = _run_blocks(jobs, workers, _laplace_block)
    total = sum(first for first, _ in sums)
    total_sq = sum(second for _, second in sums)
    mean = total / n_trials
    variance = max(total_sq / n_trials - mean * mean, 0.0)
    return mean, math.sqrt(variance / n_trials)
