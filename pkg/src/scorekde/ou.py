"""Forward Ornstein-Uhlenbeck machinery: noise schedule, transition kernel,
conditional score, and exact forward sampling.

The forward SDE dX = -X dt + sqrt(2) dB has the explicit solution
X_t = mu(t) X_0 + sigma(t) Z with mu(t) = exp(-t) and
sigma(t) = sqrt(1 - exp(-2t)); everything here follows from that closed
form. All densities are handled in log space, and operations that would
divide by sigma(t)^2 reject t <= 0 instead of clamping it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "OUCoefficients",
    "SingularityError",
    "coefficients",
    "checked_coefficients",
    "forward_sample",
    "transition_log_density",
    "conditional_score",
]


class SingularityError(ValueError):
    """Evaluation at t <= 0, where sigma(t) = 0 degenerates kernels and scores."""


@dataclass(frozen=True)
class OUCoefficients:
    """Noise-schedule pair (mu(t), sigma(t)) of the forward process."""

    t: float
    mu: float
    sigma: float

    @property
    def sigma2(self) -> float:
        return self.sigma * self.sigma


def coefficients(t: float) -> OUCoefficients:
    """Evaluate mu(t) = exp(-t) and sigma(t) = sqrt(1 - exp(-2t)).

    ``t = 0`` is a valid schedule point (mu = 1, sigma = 0), but kernel and
    score operations go through :func:`checked_coefficients`, which rejects
    it.
    """
    t = float(t)
    if not np.isfinite(t) or t < 0.0:
        raise ValueError(f"time must be finite and nonnegative, got {t}")
    sigma2 = -np.expm1(-2.0 * t)  # 1 - exp(-2t) without cancellation near t = 0
    return OUCoefficients(t=t, mu=float(np.exp(-t)), sigma=float(np.sqrt(sigma2)))


def checked_coefficients(t: float) -> OUCoefficients:
    """Schedule at strictly positive t; raises SingularityError otherwise."""
    if not float(t) > 0.0:
        raise SingularityError(
            f"operation requires t > 0 (sigma(0) = 0 is degenerate), got t = {t}"
        )
    return coefficients(t)


def forward_sample(y, t: float, rng: np.random.Generator, count: int | None = None):
    """Draw X_t = mu(t) y + sigma(t) Z with Z ~ N(0, I).

    ``y`` is a single point ``(d,)``, optionally replicated ``count`` times,
    or a batch ``(n, d)`` receiving one draw per row.
    """
    if not float(t) > 0.0:
        raise ValueError(f"forward sampling requires t > 0, got {t}")
    c = coefficients(t)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.ndim == 1:
        shape = (count, y.shape[0]) if count is not None else y.shape
    elif y.ndim == 2:
        if count is not None:
            raise ValueError("count applies only to a single starting point")
        shape = y.shape
    else:
        raise ValueError("y must be a point (d,) or a batch (n, d)")
    return c.mu * y + c.sigma * rng.standard_normal(shape)


def transition_log_density(x, y, t: float):
    """log N(x; mu(t) y, sigma(t)^2 I), computed entirely in log space.

    ``x`` and ``y`` broadcast against each other row-wise; returns a float
    for single points and an ``(n,)`` array for batches.
    """
    c = checked_coefficients(t)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    diff = x - c.mu * y
    d = diff.shape[-1]
    sq = np.sum(diff * diff, axis=-1)
    out = -0.5 * (sq / c.sigma2 + d * np.log(2.0 * np.pi * c.sigma2))
    return float(out) if np.ndim(out) == 0 else out


def conditional_score(x, y, t: float):
    """Gradient in x of :func:`transition_log_density`: -(x - mu(t) y) / sigma(t)^2."""
    c = checked_coefficients(t)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    return -(x - c.mu * y) / c.sigma2
