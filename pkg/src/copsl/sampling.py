"""Deterministic random streams, gamma/Dirichlet sampling, preference grids.

Every random draw in the package flows through :class:`RngStream`, which pins
a named counter-based generator (Philox) so that a sampling sequence is a pure
function of (algorithm id, seed, stream) on any platform.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigurationError, InputError

RNG_ALGORITHM = "philox4x64-10"

# Preference components are clamped below this value so reciprocal-weighted
# losses never divide by zero.
MIN_PREFERENCE = 1e-6


class RngStream:
    """Seeded random stream backed by the Philox counter-based generator.

    ``stream`` selects an independent substream of the same seed (derived via
    a spawn key), so e.g. parameter initialization and preference sampling can
    consume from separate sequences without interfering.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        self.algorithm = RNG_ALGORITHM
        seq = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        self._gen = np.random.Generator(np.random.Philox(seq))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream={self.stream}, algorithm={self.algorithm!r})"

    def random(self, size=None):
        """Uniform draws on [0, 1)."""
        return self._gen.random(size)

    def uniform(self, low: float, high: float, size=None):
        return self._gen.uniform(low, high, size)

    def standard_normal(self, size=None):
        return self._gen.standard_normal(size)


def sample_gamma(rng: RngStream, shape: float) -> float:
    """Draw one Gamma(shape, 1) variate.

    Uses the Marsaglia-Tsang squeeze/acceptance method for shape >= 1 and the
    boosting transform Gamma(a) = Gamma(a + 1) * U^(1/a) for shape < 1.
    """
    shape = float(shape)
    if not shape > 0.0:
        raise InputError(f"gamma shape must be positive, got {shape}")
    if shape < 1.0:
        boost = rng.random() ** (1.0 / shape)
        return sample_gamma(rng, shape + 1.0) * boost

    d = shape - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        x = rng.standard_normal()
        v = 1.0 + c * x
        if v <= 0.0:
            continue
        v = v * v * v
        u = rng.random()
        if u <= 0.0:
            continue
        x2 = x * x
        if u < 1.0 - 0.0331 * x2 * x2:
            return d * v
        if math.log(u) < 0.5 * x2 + d * (1.0 - v + math.log(v)):
            return d * v


def sample_preferences(rng: RngStream, alpha, batch_size: int) -> np.ndarray:
    """Sample ``batch_size`` preference vectors from Dirichlet(alpha).

    Each row is built from independent gamma draws normalized to the simplex,
    then clamped below at MIN_PREFERENCE and renormalized so no component is
    exactly zero.

    Returns an array of shape (batch_size, len(alpha)).
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.ndim != 1 or alpha.size < 2:
        raise InputError("alpha must be a vector of at least two entries")
    if not (alpha > 0.0).all():
        raise InputError(f"Dirichlet parameters must be positive, got {alpha.tolist()}")
    if batch_size < 1:
        raise InputError(f"batch size must be >= 1, got {batch_size}")

    m = alpha.size
    prefs = np.empty((batch_size, m), dtype=np.float64)
    for b in range(batch_size):
        while True:
            row = np.array([sample_gamma(rng, a) for a in alpha])
            total = row.sum()
            if total > 0.0:
                break
        row /= total
        row = np.maximum(row, MIN_PREFERENCE)
        row /= row.sum()
        # Renormalization can push a clamped entry a hair back under the
        # floor; re-clamping perturbs the sum by O(m * MIN_PREFERENCE^2),
        # far inside the 1e-9 simplex tolerance.
        prefs[b] = np.maximum(row, MIN_PREFERENCE)
    return prefs


def uniform_preference_grid(num_objectives: int, count: int) -> np.ndarray:
    """Deterministic preference vectors covering the simplex.

    For two objectives this is the uniform subdivision (k/(count-1),
    1 - k/(count-1)). For three objectives it is the simplex lattice with the
    largest density H whose size (H+1)(H+2)/2 does not exceed ``count``.
    """
    if num_objectives == 2:
        if count < 2:
            raise ConfigurationError(f"grid needs at least 2 points, got {count}")
        t = np.arange(count, dtype=np.float64) / (count - 1)
        return np.column_stack([t, 1.0 - t])
    if num_objectives == 3:
        if count < 3:
            raise ConfigurationError(f"3-objective grid needs at least 3 points, got {count}")
        density = 1
        while (density + 2) * (density + 3) // 2 <= count:
            density += 1
        rows = []
        for i in range(density, -1, -1):
            for j in range(density - i, -1, -1):
                k = density - i - j
                rows.append((i / density, j / density, k / density))
        return np.array(rows, dtype=np.float64)
    raise ConfigurationError(
        f"preference grids are defined for 2 or 3 objectives, got {num_objectives}"
    )
