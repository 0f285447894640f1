"""Scenario description and line-of-sight channel synthesis.

Both front-ends (the leaky-wave antenna and the M-element MIMO baselines)
see the same users.  Each architecture's channel is scaled to unit mean
power gain on its own, so ``snr_db`` is a transmit SNR that compares
beamforming structure rather than aperture size.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rng
from .errors import ConfigError
from .physics import C, FrequencyGrid, WaveguideGeometry, aperture_gain, cutoff_frequency

ANGLE_RANGE_DEG = (10.0, 80.0)
DISTANCE_RANGE_M = (1.0, 5.0)


@dataclass(frozen=True)
class User:
    angle: float  # degrees from endfire
    distance: float  # meters
    id: int = 0

    def __post_init__(self):
        if not 0.0 < self.angle < 90.0:
            raise ConfigError(
                f"user {self.id}: angle {self.angle} outside (0, 90) degrees", "angle_out_of_range"
            )
        if not self.distance > 0.0:
            raise ConfigError(
                f"user {self.id}: distance must be > 0, got {self.distance}", "bad_distance"
            )


@dataclass(frozen=True)
class Scenario:
    grid: FrequencyGrid
    geom: WaveguideGeometry
    users: tuple[User, ...]
    snr_db: float = 10.0
    seed: int = 0
    m_antennas: int = 32

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(self.users))
        if len(self.users) < 1:
            raise ConfigError("scenario needs at least one user", "no_users")
        angles = [u.angle for u in self.users]
        if len(set(angles)) != len(angles):
            raise ConfigError("user angles must be pairwise distinct", "duplicate_angles")
        if self.m_antennas < 1:
            raise ConfigError("m_antennas must be >= 1", "bad_antennas")
        check_band(self.geom, self.grid)

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def angles(self) -> np.ndarray:
        return np.array([u.angle for u in self.users])

    @property
    def distances(self) -> np.ndarray:
        return np.array([u.distance for u in self.users])

    @property
    def noise_var(self) -> float:
        return noise_variance(self.snr_db)

    def with_geometry(self, geom: WaveguideGeometry) -> "Scenario":
        return Scenario(self.grid, geom, self.users, self.snr_db, self.seed, self.m_antennas)

    def with_snr(self, snr_db: float) -> "Scenario":
        return Scenario(self.grid, self.geom, self.users, snr_db, self.seed, self.m_antennas)


@dataclass(frozen=True)
class ChannelMatrix:
    """Complex channel gains: ``lwa`` is (K, N); ``mimo`` is (K, M, N)."""

    lwa: np.ndarray | None = None
    mimo: np.ndarray | None = None
    flags: dict = field(default_factory=dict)


def check_band(geom: WaveguideGeometry, grid: FrequencyGrid) -> None:
    """Reject a geometry whose cutoff is not strictly below the band."""
    fc = cutoff_frequency(geom)
    if not fc < grid.f_min:
        raise ConfigError(
            f"cutoff {fc / 1e9:.4f} GHz is not below band start {grid.f_min / 1e9:.4f} GHz",
            "cutoff_violation",
        )


def noise_variance(snr_db: float) -> float:
    """Per-bin noise variance for unit mean channel gain and unit mean power per bin."""
    return 10.0 ** (-snr_db / 10.0)


def friis_gain(f, d):
    """Free-space amplitude gain ``c / (4 pi d f)``."""
    return C / (4.0 * np.pi * np.asarray(d, dtype=float) * np.asarray(f, dtype=float))


def random_users(
    seed: int,
    count: int,
    *key: int,
    angle_range=ANGLE_RANGE_DEG,
    distance_range=DISTANCE_RANGE_M,
) -> tuple[User, ...]:
    """Users at uniform random angles and distances drawn from stream ``(seed, *key)``."""
    if count < 1:
        raise ConfigError("user count must be >= 1", "no_users")
    bg = rng.stream(seed, *key)
    angles = rng.uniform_range(bg, angle_range[0], angle_range[1], count)
    dists = rng.uniform_range(bg, distance_range[0], distance_range[1], count)
    return tuple(User(float(a), float(d), k) for k, (a, d) in enumerate(zip(angles, dists)))


def _unit_mean_power(h: np.ndarray) -> np.ndarray:
    return h / np.sqrt(np.mean(np.abs(h) ** 2))


def lwa_channel(scenario: Scenario, normalize: bool = True, include_distance: bool = True):
    """Leaky-wave channel ``h[k, n] = G(f_n, theta_k) * friis(f_n, d_k)``.

    With ``normalize`` the matrix is scaled to mean ``|h|^2 = 1``.
    ``include_distance=False`` drops the Friis factor (useful for isolating
    the aperture response).
    """
    check_band(scenario.geom, scenario.grid)
    f = scenario.grid.freqs
    h = aperture_gain(scenario.geom, f[None, :], scenario.angles[:, None])
    if include_distance:
        h = h * friis_gain(f[None, :], scenario.distances[:, None])
    return _unit_mean_power(h) if normalize else h


def element_spacing(grid: FrequencyGrid) -> float:
    """Half a wavelength at the top of the band."""
    return C / (2.0 * grid.f_max)


def mimo_channel(scenario: Scenario, normalize: bool = True) -> np.ndarray:
    """Uniform-linear-array LoS channel ``g[k, m, n]`` of shape (K, M, N).

    Element ``m`` sits at ``m * delta`` along the array axis and angles are
    measured from that axis, so the per-element phase is
    ``-2 pi f_n m delta cos(theta_k) / c``.
    """
    f = scenario.grid.freqs
    m = np.arange(scenario.m_antennas)
    delta = element_spacing(scenario.grid)
    cos_t = np.cos(np.radians(scenario.angles))
    phase = -2.0 * np.pi * f[None, None, :] * m[None, :, None] * delta * cos_t[:, None, None] / C
    amp = friis_gain(f[None, None, :], scenario.distances[:, None, None])
    g = amp * np.exp(1j * phase)
    return _unit_mean_power(g) if normalize else g


def synthesize(scenario: Scenario) -> ChannelMatrix:
    return ChannelMatrix(lwa=lwa_channel(scenario), mimo=mimo_channel(scenario))
