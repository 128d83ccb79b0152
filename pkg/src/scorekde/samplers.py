"""Backward (generation) SDE integration and forward terminal sampling.

The backward pass is Euler-Maruyama on the time-reversed process,
parametrized in forward-sampler time s in [0, T - delta] with the score
evaluated at T - s, and stops at the last grid point <= T - delta.
Trajectory j owns the RNG substream (seed, TRAJECTORY, j), so a batch is
bit-identical for a given config regardless of batch size, memory
chunking, or thread layout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .ou import SingularityError, coefficients
from .rng import substream
from .scores import Dataset, IsotropicGaussianTarget, ScoreField

__all__ = ["SamplerConfig", "SampleBatch", "backward_sample", "forward_terminal_sample"]

_CHUNK_BYTES = 1 << 27  # cap on pre-drawn per-chunk noise blocks (128 MiB)


@dataclass(frozen=True, eq=False)
class SamplerConfig:
    """Backward-integration schedule.

    Either a uniform ``step_size`` (grid = K + 1 points over [0, horizon],
    K = ceil(horizon / step_size)) or an explicit strictly increasing
    ``grid`` from 0 to horizon. ``early_stop`` is the gap delta left before
    the horizon; ``noise_enabled`` exists only for deterministic
    diagnostics and must stay True for actual sampling.
    """

    horizon: float
    step_size: float | None = None
    grid: np.ndarray | None = None
    early_stop: float = 0.0
    seed: int = 0
    noise_enabled: bool = True

    def __post_init__(self):
        if not float(self.horizon) > 0.0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if (self.step_size is None) == (self.grid is None):
            raise ValueError("provide exactly one of step_size or grid")
        if self.step_size is not None and not float(self.step_size) > 0.0:
            raise ValueError(f"step_size must be positive, got {self.step_size}")
        if self.grid is not None:
            g = np.asarray(self.grid, dtype=float)
            if (
                g.ndim != 1
                or g.shape[0] < 2
                or g[0] != 0.0
                or not np.isclose(g[-1], self.horizon, rtol=1e-9, atol=0.0)
                or np.any(np.diff(g) <= 0.0)
            ):
                raise ValueError("grid must increase strictly from 0 to horizon")
            g = g.copy()
            g[-1] = float(self.horizon)
            g.setflags(write=False)
            object.__setattr__(self, "grid", g)
        if not 0.0 <= float(self.early_stop) < float(self.horizon):
            raise ValueError(
                f"early_stop must lie in [0, horizon), got {self.early_stop}"
            )
        if int(self.seed) < 0:
            raise ValueError(f"seed must be nonnegative, got {self.seed}")

    def time_grid(self) -> np.ndarray:
        """Integration grid 0 = t_0 < ... < t_K = horizon."""
        if self.grid is not None:
            return self.grid
        steps = int(np.ceil(self.horizon / self.step_size))
        return np.linspace(0.0, self.horizon, steps + 1)

    def stop_index(self) -> int:
        """Index of the last grid point <= horizon - early_stop.

        A relative float guard keeps grid points that land exactly on the
        cutoff (up to accumulated rounding) inside the integration range.
        """
        grid = self.time_grid()
        cutoff = (self.horizon - self.early_stop) * (1.0 + 1e-12) + 1e-15
        return int(np.searchsorted(grid, cutoff, side="right") - 1)


@dataclass(frozen=True, eq=False)
class SampleBatch:
    """A batch of points plus the provenance needed to reproduce it."""

    points: np.ndarray
    score_descriptor: str
    config: SamplerConfig | None = None
    stop_time: float | None = None
    residual_gap: float | None = None
    initial: np.ndarray | None = None

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.shape[0] < 1:
            raise ValueError("batch must contain at least one point")
        object.__setattr__(self, "points", pts)

    @property
    def count(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def backward_sample(
    score: ScoreField,
    config: SamplerConfig,
    count: int,
    initial: np.ndarray | None = None,
) -> SampleBatch:
    """Integrate the reverse-time SDE from standard-normal initial draws.

    The update over grid step n is

        X_n = X_{n-1} + dt_n (X_{n-1} + 2 score(T - t_{n-1}, X_{n-1}))
              + sqrt(2 dt_n) Z_n,

    stopping at the last grid point <= T - early_stop; the leftover gap
    (< one step) is recorded as ``residual_gap`` on the batch. Trajectory j
    draws its initial point and noise from substream
    ``(config.seed, TRAJECTORY, j)``. Pass ``initial`` with shape
    (count, d) to start from fixed positions instead (diagnostics only;
    the init draw is then skipped and the stream starts at the noise
    block).
    """
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")
    d = score.dim
    grid = config.time_grid()
    stop = config.stop_index()
    horizon = float(config.horizon)
    if initial is not None:
        initial = np.asarray(initial, dtype=float)
        if initial.shape != (count, d):
            raise ValueError(f"initial must have shape ({count}, {d})")

    points = np.empty((count, d))
    inits = np.empty((count, d))
    if config.noise_enabled and stop > 0:
        rows = max(1, int(_CHUNK_BYTES // (stop * d * 8)))
    else:
        rows = count
    for lo in range(0, count, rows):
        hi = min(count, lo + rows)
        block = hi - lo
        noise = np.empty((block, stop, d)) if config.noise_enabled and stop > 0 else None
        x0 = np.empty((block, d))
        for j in range(lo, hi):
            stream = substream(config.seed, rngmod.TRAJECTORY, j)
            if initial is not None:
                x0[j - lo] = initial[j]
            else:
                x0[j - lo] = stream.standard_normal(d)
            if noise is not None:
                noise[j - lo] = stream.standard_normal((stop, d))
        x = x0.copy()
        for n in range(1, stop + 1):
            t_prev = grid[n - 1]
            dt = grid[n] - t_prev
            try:
                drift = x + 2.0 * score.eval(horizon - t_prev, x)
            except SingularityError as exc:
                raise SingularityError(
                    f"score evaluation became singular at step {n} "
                    f"(reverse time {horizon - t_prev})"
                ) from exc
            x = x + dt * drift
            if noise is not None:
                x += np.sqrt(2.0 * dt) * noise[:, n - 1, :]
        points[lo:hi] = x
        inits[lo:hi] = x0

    stop_time = float(grid[stop])
    return SampleBatch(
        points=points,
        score_descriptor=score.descriptor,
        config=config,
        stop_time=stop_time,
        residual_gap=float(horizon - config.early_stop - stop_time),
        initial=inits,
    )


def forward_terminal_sample(
    source, horizon: float, count: int, rng: np.random.Generator
) -> SampleBatch:
    """Push draws from the dataset (uniform) or target through the forward
    map X_T = mu(T) y + sigma(T) Z.

    Used to measure how close the forward law at time T is to the standard
    Gaussian.
    """
    if not float(horizon) > 0.0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")
    c = coefficients(horizon)
    if isinstance(source, Dataset):
        y = source.points[rng.integers(0, source.n, size=count)]
        label = "forward-ou(dataset)"
    elif isinstance(source, IsotropicGaussianTarget):
        y = source.sample(count, rng)
        label = "forward-ou(gaussian)"
    else:
        raise TypeError("source must be a Dataset or an IsotropicGaussianTarget")
    pts = c.mu * y + c.sigma * rng.standard_normal(y.shape)
    return SampleBatch(points=pts, score_descriptor=label)
