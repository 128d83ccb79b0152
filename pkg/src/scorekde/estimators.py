"""Monte-Carlo and quadrature estimators.

Score-matching losses, the score-approximation-error protocol, Gaussian KL
divergence, total-variation estimates, an energy-distance two-sample test,
nearest-training-point statistics, and log-log rate fitting.

Every Monte-Carlo routine reports a point value, the standard error of the
mean, and the full parameter record that produced it. Bound checks built on
these estimates treat ``estimate <= bound + 3 * std_error`` as the pass
criterion, so sampling noise cannot produce false failures.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.spatial.distance import cdist

from . import rng as rngmod
from .ou import checked_coefficients
from .rng import substream
from .samplers import SampleBatch
from .scores import (
    Dataset,
    IsotropicGaussianTarget,
    ScoreField,
    empirical_optimal_score,
    gaussian_marginal,
)

__all__ = [
    "EstimateReport",
    "ErrorCurve",
    "EnergyTestResult",
    "NNDistanceStats",
    "csm_loss",
    "sm_loss",
    "score_error_protocol",
    "kl_gaussians",
    "tv_mc",
    "tv_quadrature_1d",
    "equal_mixture_sampler",
    "energy_distance_test",
    "nn_distance_stats",
    "loglog_slope",
]


@dataclass(frozen=True)
class EstimateReport:
    """A Monte-Carlo estimate: value, standard error of the mean, replicate
    count, and the parameters that produced it."""

    value: float
    std_error: float
    replicates: int
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.std_error >= 0.0:
            raise ValueError("std_error must be nonnegative")
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")


@dataclass
class ErrorCurve:
    """Error estimates against training-set size, with the fitted log-log
    trend filled in by the caller."""

    entries: list
    fitted_slope: float | None = None
    fitted_intercept: float | None = None

    def __post_init__(self):
        sizes = [int(n) for n, _ in self.entries]
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ValueError("sample sizes must be strictly increasing")


def _points_of(batch) -> np.ndarray:
    if isinstance(batch, SampleBatch):
        return batch.points
    return np.atleast_2d(np.asarray(batch, dtype=float))


def _mean_report(values, parameters: dict) -> EstimateReport:
    values = np.asarray(values, dtype=float)
    n = values.size
    se = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return EstimateReport(float(values.mean()), se, int(n), parameters)


def csm_loss(
    score: ScoreField, source, t: float, mc_samples: int, rng: np.random.Generator
) -> EstimateReport:
    """Estimate E ||score(t, x) - u(t, x | y)||^2 at fixed t.

    ``y`` is drawn from the Gaussian target or uniformly from the dataset,
    then x ~ N(mu(t) y, sigma(t)^2 I), and u(t, x | y) is the transition
    kernel's score. Shared-randomness comparisons between two fields come
    from calling this twice with identically seeded generators; the draws
    do not depend on the field.
    """
    if mc_samples < 1:
        raise ValueError("mc_samples must be at least 1")
    c = checked_coefficients(t)
    if isinstance(source, Dataset):
        y = source.points[rng.integers(0, source.n, size=mc_samples)]
        origin = f"dataset(n={source.n})"
    elif isinstance(source, IsotropicGaussianTarget):
        y = source.sample(mc_samples, rng)
        origin = "gaussian-target"
    else:
        raise TypeError("source must be a Dataset or an IsotropicGaussianTarget")
    x = c.mu * y + c.sigma * rng.standard_normal(y.shape)
    cond = -(x - c.mu * y) / c.sigma2
    resid = score.eval(t, x) - cond
    vals = np.sum(resid * resid, axis=1)
    return _mean_report(
        vals,
        {
            "loss": "csm",
            "t": float(t),
            "mc_samples": int(mc_samples),
            "source": origin,
            "score": score.descriptor,
        },
    )


def sm_loss(
    score: ScoreField,
    target: IsotropicGaussianTarget,
    t: float,
    mc_samples: int,
    rng: np.random.Generator,
) -> EstimateReport:
    """Estimate E_{x ~ p_t} ||score(t, x) - u(t, x)||^2 against the exact
    marginal score, which exists in closed form only for isotropic Gaussian
    targets."""
    if not isinstance(target, IsotropicGaussianTarget):
        raise TypeError(
            "sm_loss needs the exact marginal score; only isotropic Gaussian targets are supported"
        )
    if mc_samples < 1:
        raise ValueError("mc_samples must be at least 1")
    c = checked_coefficients(t)
    mean_t, var_t = gaussian_marginal(target, t)
    x = mean_t + np.sqrt(var_t) * rng.standard_normal((mc_samples, target.dim))
    exact = (c.mu * target.mean - x) / var_t
    resid = score.eval(t, x) - exact
    vals = np.sum(resid * resid, axis=1)
    return _mean_report(
        vals,
        {
            "loss": "sm",
            "t": float(t),
            "mc_samples": int(mc_samples),
            "score": score.descriptor,
        },
    )


def score_error_protocol(
    target: IsotropicGaussianTarget,
    n_train: int,
    *,
    delta: float = 0.02,
    horizon: float = 5.0,
    grid_step: float = 0.02,
    mc_points: int = 1000,
    repetitions: int = 10,
    seed: int = 0,
    threads: int | None = None,
    score_factory: Callable[[Dataset], ScoreField] | None = None,
) -> EstimateReport:
    """Mean squared distance between the dataset score and the exact score,
    averaged over a uniform time grid on [delta, horizon].

    For each repetition: draw a fresh dataset of ``n_train`` points from
    ``target``; for every grid time t draw ``mc_points`` points from the
    closed-form marginal p_t; average ||s(t, x) - u(t, x)||^2 over grid
    times and draws. The report is the mean and standard error over
    repetitions.

    ``score_factory`` (Dataset -> ScoreField) defaults to the empirical
    optimal score; substituting a factory that returns the exact score
    gives exactly zero. Repetition r uses substream (seed, REPLICATE, r)
    and the reduction runs in index order, so results do not depend on
    ``threads``.
    """
    if not 0.0 < delta < horizon:
        raise ValueError(f"need 0 < delta < horizon, got delta={delta}, horizon={horizon}")
    if not grid_step > 0.0:
        raise ValueError(f"grid_step must be positive, got {grid_step}")
    if n_train < 1 or mc_points < 1 or repetitions < 1:
        raise ValueError("n_train, mc_points, and repetitions must be at least 1")
    steps = int(np.floor((horizon - delta) / grid_step + 1e-9))
    t_grid = delta + grid_step * np.arange(steps + 1)
    factory = score_factory or empirical_optimal_score

    def one_repetition(r: int) -> float:
        stream = substream(seed, rngmod.REPLICATE, r)
        dataset = Dataset(target.sample(n_train, stream), source="synthetic-gaussian")
        field_ = factory(dataset)
        total = 0.0
        for t in t_grid:
            t = float(t)
            c = checked_coefficients(t)
            mean_t, var_t = gaussian_marginal(target, t)
            x = mean_t + np.sqrt(var_t) * stream.standard_normal((mc_points, target.dim))
            exact = (c.mu * target.mean - x) / var_t
            resid = field_.eval(t, x) - exact
            total += float(np.mean(np.sum(resid * resid, axis=1)))
        return total / t_grid.size

    if threads is not None and threads > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            per_rep = list(pool.map(one_repetition, range(repetitions)))
    else:
        per_rep = [one_repetition(r) for r in range(repetitions)]

    return _mean_report(
        per_rep,
        {
            "protocol": "score-error",
            "n_train": int(n_train),
            "delta": float(delta),
            "horizon": float(horizon),
            "grid_step": float(grid_step),
            "grid_points": int(t_grid.size),
            "mc_points": int(mc_points),
            "repetitions": int(repetitions),
            "seed": int(seed),
        },
    )


def kl_gaussians(mean_p, cov_p, mean_q, cov_q) -> float:
    """KL(N(mean_p, cov_p) || N(mean_q, cov_q)) for isotropic (scalar) or
    diagonal (vector) covariance specifications:

    (1/2) [sum log(vq/vp) - d + sum (mp - mq)^2 / vq + sum vp / vq].
    """
    mp = np.atleast_1d(np.asarray(mean_p, dtype=float))
    mq = np.atleast_1d(np.asarray(mean_q, dtype=float))
    if mp.shape != mq.shape:
        raise ValueError("means must have the same dimension")
    d = mp.shape[0]
    vp = np.broadcast_to(np.asarray(cov_p, dtype=float), (d,))
    vq = np.broadcast_to(np.asarray(cov_q, dtype=float), (d,))
    if not (np.all(vp > 0.0) and np.all(vq > 0.0)):
        raise ValueError("covariances must be positive")
    return float(
        0.5 * (np.sum(np.log(vq) - np.log(vp)) - d + np.sum((mp - mq) ** 2 / vq) + np.sum(vp / vq))
    )


def equal_mixture_sampler(draw_f, draw_g):
    """Combine single-law samplers ``(count, rng) -> (count, d)`` into a
    sampler for the equal-weight mixture (f + g)/2."""

    def draw(count, rng):
        pick = rng.random(count) < 0.5
        a = np.atleast_2d(np.asarray(draw_f(count, rng), dtype=float))
        b = np.atleast_2d(np.asarray(draw_g(count, rng), dtype=float))
        return np.where(pick[:, None], a, b)

    return draw


def tv_mc(
    log_f,
    log_g,
    mixture_sampler,
    mc_samples: int,
    rng: np.random.Generator,
) -> EstimateReport:
    """Estimate TV(f, g) = (1/2) int |f - g| by importance sampling from
    the equal mixture m = (f + g)/2: the mean of |f - g| / m over x ~ m,
    halved.

    ``log_f`` and ``log_g`` map an (M, d) array of points to (M,) log
    densities; ``mixture_sampler`` is ``(count, rng) -> (count, d)`` and
    must draw from m (see :func:`equal_mixture_sampler`). The per-point
    ratios are formed in log space, so they stay finite wherever either
    density is representable; every ratio lies in [0, 2], hence the
    estimate lies in [0, 1].
    """
    if mc_samples < 1:
        raise ValueError("mc_samples must be at least 1")
    x = np.atleast_2d(np.asarray(mixture_sampler(mc_samples, rng), dtype=float))
    lf = np.asarray(log_f(x), dtype=float)
    lg = np.asarray(log_g(x), dtype=float)
    lm = np.logaddexp(lf, lg) - np.log(2.0)
    vals = 0.5 * np.abs(np.exp(lf - lm) - np.exp(lg - lm))
    return _mean_report(vals, {"estimator": "tv-mc", "mc_samples": int(mc_samples)})


def tv_quadrature_1d(log_f, log_g, lower: float, upper: float, grid_points: int = 100_001) -> float:
    """Trapezoid-rule value of (1/2) int |f - g| for 1-D densities over
    [lower, upper]; the range must cover effectively all mass of both."""
    if not upper > lower:
        raise ValueError("need upper > lower")
    if grid_points < 2:
        raise ValueError("grid_points must be at least 2")
    x = np.linspace(float(lower), float(upper), int(grid_points))[:, None]
    f = np.exp(np.asarray(log_f(x), dtype=float))
    g = np.exp(np.asarray(log_g(x), dtype=float))
    if f.shape != (x.shape[0],) or g.shape != (x.shape[0],):
        raise ValueError("log densities must map (M, 1) points to (M,) values; d must be 1")
    return float(np.trapezoid(0.5 * np.abs(f - g), x[:, 0]))


@dataclass(frozen=True)
class EnergyTestResult:
    statistic: float
    p_value: float
    permutations: int


def energy_distance_test(
    batch_a, batch_b, permutations: int, rng: np.random.Generator
) -> EnergyTestResult:
    """Two-sample energy-distance test with a permutation p-value.

    Uses the all-pairs (V-statistic) form 2 E|A - B| - E|A - A'| - E|B - B'|,
    which is exactly zero for identical batches. The p-value is the add-one
    estimate (1 + #{permuted >= observed}) / (1 + permutations).
    """
    a = _points_of(batch_a)
    b = _points_of(batch_b)
    if a.shape[1] != b.shape[1]:
        raise ValueError("batches must have the same dimension")
    if permutations < 200:
        raise ValueError("at least 200 permutations are required for a usable p-value")
    pooled = np.vstack([a, b])
    n = pooled.shape[0]
    na = a.shape[0]
    nb = n - na
    dmat = cdist(pooled, pooled)
    # Block sums through indicator algebra: with group indicator z,
    # sum_AA = z'Dz, sum_AB = z'D1 - z'Dz, sum_BB = 1'D1 - 2 z'D1 + z'Dz,
    # so one GEMM covers the observed labeling and all permutations.
    cols = np.zeros((n, permutations + 1))
    cols[:na, 0] = 1.0
    for k in range(1, permutations + 1):
        perm = rng.permutation(n)
        cols[perm[:na], k] = 1.0
    dz = dmat @ cols
    s_aa = np.einsum("ij,ij->j", cols, dz)
    row = dmat.sum(axis=0) @ cols
    total = float(dmat.sum())
    s_ab = row - s_aa
    s_bb = total - 2.0 * row + s_aa
    stats = 2.0 * s_ab / (na * nb) - s_aa / (na * na) - s_bb / (nb * nb)
    observed = float(stats[0])
    p_value = (1.0 + int(np.sum(stats[1:] >= observed))) / (permutations + 1.0)
    return EnergyTestResult(observed, float(p_value), int(permutations))


@dataclass(frozen=True)
class NNDistanceStats:
    """Distance from each generated point to its nearest training point."""

    distances: np.ndarray
    nearest_index: np.ndarray
    median: float

    def fraction_below(self, r: float) -> float:
        return float(np.mean(self.distances < r))


def nn_distance_stats(generated, dataset) -> NNDistanceStats:
    """Euclidean nearest-training-point distances for a generated batch;
    ties resolve to the lowest training index."""
    gen = _points_of(generated)
    train = dataset.points if isinstance(dataset, Dataset) else np.atleast_2d(
        np.asarray(dataset, dtype=float)
    )
    if gen.size == 0 or train.size == 0:
        raise ValueError("generated batch and dataset must both be nonempty")
    if gen.shape[1] != train.shape[1]:
        raise ValueError("generated batch and dataset must have the same dimension")
    dmat = cdist(gen, train)
    idx = dmat.argmin(axis=1)  # argmin takes the first occurrence: lowest index
    dist = dmat[np.arange(gen.shape[0]), idx]
    return NNDistanceStats(dist, idx, float(np.median(dist)))


def loglog_slope(curve) -> tuple[float, float]:
    """Least-squares slope and intercept of log(value) against log(N).

    Accepts an :class:`ErrorCurve` or a sequence of ``(n, value)`` pairs,
    where ``value`` may be a number or an :class:`EstimateReport`.
    """
    entries = curve.entries if isinstance(curve, ErrorCurve) else list(curve)
    if len(entries) < 3:
        raise ValueError("slope fitting needs at least 3 entries")
    sizes = np.array([float(n) for n, _ in entries])
    values = np.array(
        [float(v.value) if isinstance(v, EstimateReport) else float(v) for _, v in entries]
    )
    if np.any(sizes <= 0.0) or np.any(values <= 0.0):
        raise ValueError("slope fitting needs positive sizes and values")
    slope, intercept = np.polyfit(np.log(sizes), np.log(values), 1)
    return float(slope), float(intercept)
