"""Counter-based per-trajectory random number streams.

Each trajectory owns a Philox stream keyed by (base seed, trajectory index),
so records are reproducible bit for bit regardless of how trajectories are
batched across workers.  Gaussian variates are produced by the inverse
normal CDF applied to uniforms, one uniform per variate, keeping the draw
count (and therefore the stream position) independent of the sampling
algorithm numpy happens to ship.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_VIRTUAL_SALT = 0x9E3779B97F4A7C15  # separates virtual-measurement draws from the main stream


def _philox(base_seed: int, stream: int, salt: int = 0) -> np.random.Generator:
    key = np.array([np.uint64(base_seed ^ salt), np.uint64(stream)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


class TrajectoryStream:
    """Uniform/normal draws for one trajectory, in a fixed documented order."""

    def __init__(self, base_seed: int, stream: int):
        self.base_seed = int(base_seed)
        self.stream = int(stream)
        self._gen = _philox(self.base_seed, self.stream)

    def uniform(self) -> float:
        return float(self._gen.random())

    def uniforms(self, n: int) -> np.ndarray:
        return self._gen.random(n)

    def normal(self) -> float:
        return float(uniform_to_normal(self._gen.random()))

    def normals(self, n: int) -> np.ndarray:
        return uniform_to_normal(self._gen.random(n))


def uniform_to_normal(u):
    """Inverse-CDF transform; clipped away from 0/1 to keep ndtri finite."""
    return ndtri(np.clip(u, 1e-15, 1.0 - 1e-16))


def virtual_stream(base_seed: int, stream: int) -> np.random.Generator:
    """Separate stream for virtual mid-trajectory measurements (plot traces)."""
    return _philox(base_seed, stream, salt=_VIRTUAL_SALT)
