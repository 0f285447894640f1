"""Direction finding with a single leaky-wave element.

Because every frequency bin radiates toward its own angle, the vector of
per-bin responses plays the role of an array manifold: MUSIC runs on the
frequency-domain covariance with steering vectors ``a(theta) = G(f_n, theta)``.
Measurements are assumed calibrated, i.e. the angle-independent Friis slope
has already been divided out of each bin.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import rng
from .channel import Scenario
from .errors import NumericalError
from .physics import FrequencyGrid, WaveguideGeometry, aperture_gain

DEFAULT_ANGLE_GRID = (0.5, 89.5, 0.05)
_MIN_NULL_POWER = 1e-20


def angle_grid(start: float = 0.5, stop: float = 89.5, step: float = 0.05) -> np.ndarray:
    """Inclusive uniform grid; endpoints are rounded to the step to avoid drift."""
    n = int(round((stop - start) / step)) + 1
    return np.round(start + step * np.arange(n), 10)


@dataclass(frozen=True)
class SteeringModel:
    geom: WaveguideGeometry
    grid: FrequencyGrid
    calibration: np.ndarray | None = None  # per-bin complex reference, divided out of data

    @property
    def freqs(self) -> np.ndarray:
        return self.grid.freqs

    def raw(self, angles) -> np.ndarray:
        """Unnormalized responses, shape (len(angles), N)."""
        angles = np.atleast_1d(np.asarray(angles, dtype=float))
        return aperture_gain(self.geom, self.freqs[None, :], angles[:, None])

    def steering(self, angles) -> np.ndarray:
        """Unit-norm steering vectors, one row per angle."""
        a = self.raw(angles)
        return a / np.linalg.norm(a, axis=1, keepdims=True)

    def calibrate(self, x: np.ndarray) -> np.ndarray:
        if self.calibration is None:
            return x
        cal = np.asarray(self.calibration)
        return x / (cal[:, None] if x.ndim == 2 else cal)

    def subband(self, start: int, length: int) -> "SteeringModel":
        f = self.freqs
        sub = FrequencyGrid(float(f[start]), float(f[start + length - 1]), length)
        cal = None if self.calibration is None else np.asarray(self.calibration)[start : start + length]
        return SteeringModel(self.geom, sub, cal)

    def sliding(self, length: int) -> list["SteeringModel"]:
        """Models of every length-``length`` window, in order of start bin."""
        return [self.subband(i, length) for i in range(self.grid.n_bins - length + 1)]


@dataclass
class MusicResult:
    angle_grid: np.ndarray
    pseudo_spectrum: np.ndarray  # linear, positive
    peaks: np.ndarray
    assumed_sources: int
    shortfall: bool = False
    eigenvalues: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def spectrum_db(self) -> np.ndarray:
        """Pseudo-spectrum in dB relative to its maximum."""
        return 10.0 * np.log10(self.pseudo_spectrum / self.pseudo_spectrum.max())


def simulate_uplink(
    scenario: Scenario,
    n_snapshots: int,
    pilot_scheme: str = "qpsk",
    noise: bool = True,
    trial: int = 0,
) -> np.ndarray:
    """Calibrated N x T measurements of K users' pilots through the antenna.

    ``X[:, t] = sum_k a(theta_k) s_k[t] + sigma w[:, t]`` with the (K, N)
    response matrix scaled to unit mean power and ``sigma^2`` set by the
    scenario SNR.  ``pilot_scheme`` is ``"qpsk"`` (i.i.d. unit-power QPSK)
    or ``"orthogonal"`` (rows of a T-point DFT, requires T >= K).
    """
    if n_snapshots < 1:
        raise ValueError("need at least one snapshot")
    a = aperture_gain(scenario.geom, scenario.grid.freqs[None, :], scenario.angles[:, None])
    a = a / np.sqrt(np.mean(np.abs(a) ** 2))
    k_users = scenario.n_users
    if pilot_scheme == "qpsk":
        s = rng.qpsk(rng.stream(scenario.seed, rng.MUSIC, trial, rng.PILOTS), (k_users, n_snapshots))
    elif pilot_scheme == "orthogonal":
        if n_snapshots < k_users:
            raise ValueError("orthogonal pilots need T >= K")
        t = np.arange(n_snapshots)
        s = np.exp(-2j * np.pi * np.outer(np.arange(k_users), t) / n_snapshots)
    else:
        raise ValueError(f"unknown pilot scheme {pilot_scheme!r}")
    x = a.T @ s
    if noise:
        w = rng.awgn(scenario.seed, x.shape, rng.MUSIC, trial, rng.NOISE)
        x = x + np.sqrt(scenario.noise_var) * w
    return x


def covariance(x: np.ndarray) -> np.ndarray:
    """Sample covariance ``X X^H / T``."""
    x = np.asarray(x)
    if x.ndim == 1:
        x = x[:, None]
    r = x @ x.conj().T / x.shape[1]
    return 0.5 * (r + r.conj().T)


def eigh(r: np.ndarray, atol: float = 1e-12):
    """Eigenvalues (descending) and orthonormal eigenvectors of a Hermitian matrix."""
    r = np.asarray(r)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise ValueError("eigh needs a square matrix")
    scale = max(np.abs(r).max(), 1.0)
    if np.abs(r - r.conj().T).max() > atol * scale:
        raise ValueError("matrix is not Hermitian")
    vals, vecs = np.linalg.eigh(r)
    return vals[::-1], vecs[:, ::-1]


def numerical_rank(r: np.ndarray, rtol: float = 1e-8) -> int:
    vals = np.abs(np.linalg.eigvalsh(0.5 * (r + r.conj().T)))
    return int(np.count_nonzero(vals > rtol * vals.max()))


def freq_smoothed_covariance(x: np.ndarray, subband_len: int) -> np.ndarray:
    """Average of ``x_i x_i^H`` over all length-``subband_len`` windows of one snapshot."""
    x = np.asarray(x).ravel()
    n = x.size
    if not 2 <= subband_len <= n:
        raise ValueError(f"subband_len must lie in [2, {n}], got {subband_len}")
    windows = np.lib.stride_tricks.sliding_window_view(x, subband_len)  # (S, L)
    r = windows.T @ windows.conj() / windows.shape[0]
    return 0.5 * (r + r.conj().T)


def _null_power(signal_space: np.ndarray, a: np.ndarray) -> np.ndarray:
    # ||E_n^H a||^2 = ||a||^2 - ||E_s^H a||^2 for unit-norm a and a complete eigenbasis
    proj = np.sum(np.abs(a.conj() @ signal_space) ** 2, axis=1)
    return np.maximum(1.0 - proj, _MIN_NULL_POWER)


def local_peaks(y: np.ndarray, count: int) -> np.ndarray:
    """Indices of the ``count`` largest strict interior local maxima, by height."""
    inner = np.flatnonzero((y[1:-1] > y[:-2]) & (y[1:-1] > y[2:])) + 1
    return inner[np.argsort(-y[inner], kind="stable")][:count]


def refine_peak(grid: np.ndarray, y: np.ndarray, i: int) -> float:
    """Three-point parabolic vertex around grid index ``i``."""
    y0, y1, y2 = y[i - 1], y[i], y[i + 1]
    denom = y0 - 2.0 * y1 + y2
    offset = 0.0 if denom == 0 else 0.5 * (y0 - y2) / denom
    return float(grid[i] + np.clip(offset, -0.5, 0.5) * (grid[i + 1] - grid[i]))


def music_spectrum(
    r: np.ndarray,
    model: SteeringModel | Sequence[SteeringModel],
    k_sources: int,
    angles=None,
) -> MusicResult:
    """MUSIC pseudo-spectrum ``1 / ||E_n^H a(theta)||^2`` and its peaks.

    ``model`` may be a list of sliding subband models (for a smoothed
    covariance); the null-space power is then averaged over the windows.
    Peaks are the ``k_sources`` largest strict local maxima, refined on the
    dB spectrum by parabolic interpolation.
    """
    grid = angle_grid(*DEFAULT_ANGLE_GRID) if angles is None else np.asarray(angles, dtype=float)
    if np.any((grid <= 0) | (grid >= 90)):
        raise ValueError("angle grid must lie inside (0, 90) degrees")
    n = r.shape[0]
    if not 1 <= k_sources < n:
        raise ValueError(f"need 1 <= k_sources < N={n}, got {k_sources}")
    vals, vecs = eigh(r)
    signal_space = vecs[:, :k_sources]
    models = [model] if isinstance(model, SteeringModel) else list(model)
    null = np.mean([_null_power(signal_space, m.steering(grid)) for m in models], axis=0)
    spectrum = 1.0 / null

    y = 10.0 * np.log10(spectrum)
    idx = local_peaks(y, k_sources)
    peaks = np.sort([refine_peak(grid, y, int(i)) for i in idx])
    return MusicResult(grid, spectrum, np.asarray(peaks), k_sources, len(idx) < k_sources, vals)


def estimate(
    x: np.ndarray,
    model: SteeringModel,
    k_sources: int,
    angles=None,
    subband_len: int | None = None,
) -> MusicResult:
    """Covariance plus MUSIC; a single snapshot with ``subband_len`` uses frequency smoothing."""
    x = model.calibrate(np.asarray(x))
    if subband_len is None:
        return music_spectrum(covariance(x), model, k_sources, angles)
    if x.ndim == 2:
        if x.shape[1] != 1:
            raise ValueError("frequency smoothing works on a single snapshot")
        x = x[:, 0]
    r = freq_smoothed_covariance(x, subband_len)
    return music_spectrum(r, model.sliding(subband_len), k_sources, angles)


def require_peaks(result: MusicResult) -> MusicResult:
    if result.shortfall:
        raise NumericalError(
            f"found {result.peaks.size} spectrum peaks, expected {result.assumed_sources}"
        )
    return result
