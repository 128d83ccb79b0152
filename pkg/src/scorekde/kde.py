"""Gaussian kernel density estimation: bandwidth rule, sampling, density.

A ``KdeModel`` covers both the plain estimator (center_scale = 1) and the
shrunk-center mixture that early-stopped diffusion sampling lands on
(center_scale = mu(delta), bandwidth = sigma(delta)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ou import checked_coefficients
from .samplers import SampleBatch
from .scores import Dataset, gaussian_mixture_logpdf

__all__ = ["KdeModel", "scott_bandwidth", "forward_mixture", "kde_sample", "kde_log_density"]


@dataclass(frozen=True)
class KdeModel:
    """Equal-weight Gaussian mixture over scaled training points."""

    dataset: Dataset
    bandwidth: float
    center_scale: float = 1.0

    def __post_init__(self):
        if not float(self.bandwidth) > 0.0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")
        if not 0.0 < float(self.center_scale) <= 1.0:
            raise ValueError(f"center_scale must lie in (0, 1], got {self.center_scale}")

    @property
    def centers(self) -> np.ndarray:
        return self.center_scale * self.dataset.points


def scott_bandwidth(dataset: Dataset, multiplier: float = 0.1) -> float:
    """Bandwidth multiplier * N^(-1/(d+4)) * pooled per-coordinate sample std.

    The pooled estimate is the square root of the mean per-coordinate
    sample variance, matching the isotropic kernel.
    """
    if dataset.n < 2:
        raise ValueError("bandwidth selection needs at least two points")
    pooled_var = float(np.mean(np.var(dataset.points, axis=0, ddof=1)))
    if pooled_var == 0.0:
        raise ValueError("dataset has zero variance")
    return float(multiplier) * dataset.n ** (-1.0 / (dataset.dim + 4)) * np.sqrt(pooled_var)


def forward_mixture(dataset: Dataset, t: float) -> KdeModel:
    """Forward diffusion law at time t of the empirical distribution:
    centers mu(t) y_i, bandwidth sigma(t).

    With t = delta this is exactly the law that backward sampling with the
    empirical optimal score targets when stopped delta before the horizon.
    """
    c = checked_coefficients(t)
    return KdeModel(dataset, bandwidth=c.sigma, center_scale=c.mu)


def kde_sample(model: KdeModel, count: int, rng: np.random.Generator) -> SampleBatch:
    """Pick a center uniformly, then blur: center_scale * y_j + bandwidth * Z."""
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")
    idx = rng.integers(0, model.dataset.n, size=count)
    pts = model.centers[idx] + model.bandwidth * rng.standard_normal(
        (count, model.dataset.dim)
    )
    return SampleBatch(
        points=pts,
        score_descriptor=(
            f"kde(bandwidth={model.bandwidth!r}, center_scale={model.center_scale!r})"
        ),
    )


def kde_log_density(model: KdeModel, x):
    """Log-density of the model's equal-weight Gaussian mixture at x."""
    return gaussian_mixture_logpdf(model.centers, model.bandwidth**2, x)
