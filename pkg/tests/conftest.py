"""Shared test oracles.

These stay independent of the library code they check: plain loops and
textbook formulas, no reuse of the implementation under test.
"""

from __future__ import annotations

import numpy as np
import pytest


def central_difference(f, x: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Gradient of a scalar function by central differences, one entry at a time."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.empty_like(x)
    flat = x.ravel()
    out = grad.ravel()
    for j in range(flat.size):
        orig = flat[j]
        flat[j] = orig + step
        hi = f(x)
        flat[j] = orig - step
        lo = f(x)
        flat[j] = orig
        out[j] = (hi - lo) / (2.0 * step)
    return grad


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-4) -> float:
    """Worst relative disagreement over entries large enough to compare.

    Entries where both values are below ``floor`` are checked absolutely
    against floor * 1e-5 instead (relative error is meaningless in the
    finite-difference noise floor).
    """
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    big = scale > floor
    worst = 0.0
    if big.any():
        worst = float((np.abs(analytic - numeric)[big] / scale[big]).max())
    small = ~big
    if small.any():
        residual = float(np.abs(analytic - numeric)[small].max())
        if residual > floor * 1e-5:
            worst = max(worst, residual / floor)
    return worst


def brute_force_nondominated(points: np.ndarray) -> np.ndarray:
    """Quadratic-time dominance filter straight from the definition."""
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    keep = []
    seen = set()
    for i in range(n):
        dominated = False
        for j in range(n):
            if i == j:
                continue
            if all(points[j, c] <= points[i, c] for c in range(points.shape[1])) and any(
                points[j, c] < points[i, c] for c in range(points.shape[1])
            ):
                dominated = True
                break
        if dominated:
            continue
        key = points[i].tobytes()
        if key in seen:
            continue
        seen.add(key)
        keep.append(points[i])
    return np.array(keep)


@pytest.fixture
def np_rng():
    return np.random.default_rng(20240815)
