"""Seeded, splittable random streams.

Every random draw in the package comes from a Philox-4x64 counter-based
generator keyed by ``(seed, *key)``.  Uniforms are built from the raw 64-bit
output and Gaussians by the Box-Muller transform, so a stream is reproducible
bit-for-bit independently of numpy's distribution samplers.
"""

from __future__ import annotations

import numpy as np

# stream key components
BEAMPATTERN, SUMRATE, MUSIC = 1, 2, 3
USERS, NOISE, PILOTS = 0, 1, 2

_MASK64 = (1 << 64) - 1


def stream(seed: int, *key: int) -> np.random.Philox:
    """Independent Philox stream for ``seed`` and an integer key path."""
    ss = np.random.SeedSequence(int(seed) & _MASK64, spawn_key=tuple(int(k) for k in key))
    return np.random.Philox(ss)


def uniform(bitgen: np.random.Philox, n: int) -> np.ndarray:
    """``n`` doubles on (0, 1] with 53 random bits each."""
    raw = bitgen.random_raw(n)
    return ((raw >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53


def standard_complex_normal(bitgen: np.random.Philox, shape) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples with unit variance."""
    shape = (shape,) if np.isscalar(shape) else tuple(shape)
    n = int(np.prod(shape, dtype=np.int64))
    u1 = uniform(bitgen, n)
    u2 = uniform(bitgen, n)
    # Box-Muller radius for unit total variance: real and imag each get 1/2
    r = np.sqrt(-np.log(u1))
    theta = 2.0 * np.pi * u2
    return (r * np.cos(theta) + 1j * r * np.sin(theta)).reshape(shape)


def awgn(seed: int, shape, *key: int) -> np.ndarray:
    """Unit-variance complex white Gaussian noise from stream ``(seed, *key)``."""
    return standard_complex_normal(stream(seed, *key), shape)


def qpsk(bitgen: np.random.Philox, shape) -> np.ndarray:
    """Unit-power QPSK symbols drawn uniformly from {±1 ± 1j}/sqrt(2)."""
    shape = (shape,) if np.isscalar(shape) else tuple(shape)
    n = int(np.prod(shape, dtype=np.int64))
    bits = bitgen.random_raw(n)
    re = 1.0 - 2.0 * (bits & np.uint64(1)).astype(float)
    im = 1.0 - 2.0 * ((bits >> np.uint64(1)) & np.uint64(1)).astype(float)
    return ((re + 1j * im) / np.sqrt(2.0)).reshape(shape)


def uniform_range(bitgen: np.random.Philox, low: float, high: float, n: int) -> np.ndarray:
    return low + (high - low) * (uniform(bitgen, n) - 2.0**-53)
