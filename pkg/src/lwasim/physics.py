"""Dispersion and radiation model of a uniform-slit parallel-plate leaky-wave antenna.

Angles are measured from the waveguide propagation (endfire) axis, so the
beam moves toward smaller angles as frequency increases.  Only the TE1
parallel-plate mode is modeled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError

C = 299_792_458.0  # speed of light [m/s]

# |z| below which the aperture integral is evaluated by its Taylor series
_SERIES_RADIUS = 1e-4


@dataclass(frozen=True)
class WaveguideGeometry:
    """Physical parameters of the slit antenna.

    Parameters
    ----------
    plate_sep : float
        Plate separation ``b`` [m]; sets the TE1 cutoff.
    slit_len : float
        Length ``L`` of the radiating slit [m].
    leak_alpha : float, optional
        Leakage constant [Np/m].  Defaults to ``ln(10) / (2 L)``, i.e. 90 %
        of the guided power leaks out over the slit.
    """

    plate_sep: float
    slit_len: float
    leak_alpha: float | None = None

    def __post_init__(self):
        if not self.plate_sep > 0:
            raise DomainError(f"plate_sep must be > 0, got {self.plate_sep}")
        if not self.slit_len > 0:
            raise DomainError(f"slit_len must be > 0, got {self.slit_len}")
        if self.leak_alpha is None:
            object.__setattr__(self, "leak_alpha", default_leak_alpha(self.slit_len))
        elif not self.leak_alpha >= 0:
            raise DomainError(f"leak_alpha must be >= 0, got {self.leak_alpha}")

    @property
    def cutoff(self) -> float:
        return cutoff_frequency(self)


def default_leak_alpha(slit_len: float, leaked_fraction: float = 0.9) -> float:
    """Leakage constant that radiates ``leaked_fraction`` of the power over ``slit_len``."""
    return -math.log(1.0 - leaked_fraction) / (2.0 * slit_len)


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform grid of ``n_bins`` bin centers spanning ``[f_min, f_max]`` inclusive."""

    f_min: float
    f_max: float
    n_bins: int

    def __post_init__(self):
        if not (self.f_min > 0 and self.f_min < self.f_max):
            raise DomainError(f"need 0 < f_min < f_max, got [{self.f_min}, {self.f_max}]")
        if int(self.n_bins) != self.n_bins or self.n_bins < 2:
            raise DomainError(f"n_bins must be an integer >= 2, got {self.n_bins}")

    @property
    def freqs(self) -> np.ndarray:
        return np.linspace(self.f_min, self.f_max, int(self.n_bins))

    @property
    def spacing(self) -> float:
        return (self.f_max - self.f_min) / (self.n_bins - 1)


def cutoff_frequency(geom: WaveguideGeometry) -> float:
    """TE1 cutoff ``c / (2 b)`` in Hz."""
    return C / (2.0 * geom.plate_sep)


def _check_propagating(geom, f):
    f = np.asarray(f, dtype=float)
    if np.any(f <= cutoff_frequency(geom)):
        raise DomainError(
            f"frequency at or below cutoff {cutoff_frequency(geom):.6g} Hz (evanescent mode)"
        )
    return f


def free_space_wavenumber(f):
    return 2.0 * np.pi * np.asarray(f, dtype=float) / C


def phase_constant(geom: WaveguideGeometry, f):
    """Guided phase constant ``beta(f) = k0 sqrt(1 - (f_c/f)^2)`` [rad/m]."""
    f = _check_propagating(geom, f)
    ratio = cutoff_frequency(geom) / f
    return free_space_wavenumber(f) * np.sqrt((1.0 - ratio) * (1.0 + ratio))


def beam_angle(geom: WaveguideGeometry, f):
    """Main-beam angle in degrees from endfire: ``arcsin(f_c / f)``."""
    f = _check_propagating(geom, f)
    return np.degrees(np.arcsin(cutoff_frequency(geom) / f))


def frequency_of_angle(geom: WaveguideGeometry, phi):
    """Frequency whose main beam points at ``phi`` degrees (inverse of `beam_angle`)."""
    phi = np.asarray(phi, dtype=float)
    if np.any(~((phi > 0.0) & (phi <= 90.0))):
        raise DomainError("angle must lie in (0, 90] degrees")
    return cutoff_frequency(geom) / np.sin(np.radians(phi))


def _leaky_integral(z):
    """``(1 - exp(-z)) / z`` with the removable singularity at 0 filled in."""
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    small = np.abs(z) < _SERIES_RADIUS
    zs = z[small]
    # 1 - z/2 + z^2/6 - z^3/24 + z^4/120; truncation error < 1e-22 inside the radius
    out[small] = 1.0 + zs * (-1 / 2 + zs * (1 / 6 + zs * (-1 / 24 + zs / 120)))
    zl = z[~small]
    out[~small] = -np.expm1(-zl) / zl
    return out


def aperture_gain(geom: WaveguideGeometry, f, phi):
    """Normalized complex aperture gain ``G(f, phi)``.

    Integral of the exponentially decaying traveling wave over the slit,
    ``(1/L) int_0^L exp(-(alpha + j*delta) z) dz`` with phase mismatch
    ``delta = beta(f) - k0(f) cos(phi)``.  Broadcasts over ``f`` and ``phi``.
    """
    f = _check_propagating(geom, f)
    phi = np.asarray(phi, dtype=float)
    if np.any((phi < 0.0) | (phi > 90.0)):
        raise DomainError("angle must lie in [0, 90] degrees")
    mismatch = phase_constant(geom, f) - free_space_wavenumber(f) * np.cos(np.radians(phi))
    return _leaky_integral((geom.leak_alpha + 1j * mismatch) * geom.slit_len)


def peak_gain(geom: WaveguideGeometry) -> float:
    """Upper bound ``(1 - exp(-alpha L)) / (alpha L)`` on ``|G|``, reached at phase match."""
    return float(_leaky_integral(np.array(geom.leak_alpha * geom.slit_len)).real)


class Beamwidth(NamedTuple):
    fwhm_deg: float
    truncated: bool


def beamwidth_fwhm(
    geom: WaveguideGeometry, f: float, tol: float = 1e-4, scan_step: float = 0.05
) -> Beamwidth:
    """Full width at half maximum of ``|G(f, .)|^2`` over (0, 90) degrees.

    Scans outward from the main beam in ``scan_step`` increments to bracket
    each half-power crossing, then bisects it to ``tol`` degrees.  If a side
    never drops below half power inside the domain, that side is cut at the
    domain edge and ``truncated`` is set.
    """
    phi0 = float(beam_angle(geom, f))
    half = 0.5 * abs(complex(aperture_gain(geom, f, phi0))) ** 2

    def excess(phi):
        return abs(complex(aperture_gain(geom, f, phi))) ** 2 - half

    truncated = False
    edges = []
    for direction, limit in ((-1.0, 0.0), (1.0, 90.0)):
        inner = phi0
        outer = phi0 + direction * scan_step
        while (outer - limit) * direction < 0 and excess(outer) > 0:
            inner, outer = outer, outer + direction * scan_step
        if (outer - limit) * direction >= 0:
            outer = limit
            if excess(limit) > 0:
                truncated = True
                edges.append(limit)
                continue
        while abs(outer - inner) > tol:
            mid = 0.5 * (inner + outer)
            if excess(mid) > 0:
                inner = mid
            else:
                outer = mid
        edges.append(0.5 * (inner + outer))
    return Beamwidth(edges[1] - edges[0], truncated)
