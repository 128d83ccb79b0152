"""Shared test helpers."""

import numpy as np


def central_gradient(f, x, eps=1e-5):
    """Central finite-difference gradient of a scalar function at x.

    Step scales with the coordinate magnitude; independent of any analytic
    gradient code in the library.
    """
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    for j in range(x.size):
        h = eps * (1.0 + abs(x[j]))
        xp = x.copy()
        xp[j] += h
        xm = x.copy()
        xm[j] -= h
        grad[j] = (f(xp) - f(xm)) / (2.0 * h)
    return grad


def assert_close_vectors(actual, expected, rtol, atol=1e-9):
    """Norm-based closeness: ||actual - expected|| <= rtol ||expected|| + atol."""
    actual = np.asarray(actual, dtype=float)
    expected = np.asarray(expected, dtype=float)
    gap = np.linalg.norm(actual - expected)
    allowed = rtol * np.linalg.norm(expected) + atol
    assert gap <= allowed, f"gap {gap} exceeds {allowed}"


class ZeroNoiseRng:
    """Duck-typed generator whose normal draws are all zero."""

    def standard_normal(self, shape=None):
        return np.zeros(shape if shape is not None else ())
