import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lwasim import rng
from lwasim.allocation import AllocationPlan, sum_rate
from lwasim.channel import (
    Scenario,
    User,
    element_spacing,
    friis_gain,
    lwa_channel,
    mimo_channel,
    noise_variance,
    random_users,
    synthesize,
)
from lwasim.errors import ConfigError
from lwasim.physics import C, FrequencyGrid, WaveguideGeometry, aperture_gain, beam_angle, frequency_of_angle

GEOM = WaveguideGeometry(0.8e-3, 0.02)
BAND = FrequencyGrid(0.2e12, 0.8e12, 512)


def scenario(angles, dists=None, grid=BAND, geom=GEOM, m=32, snr=10.0):
    dists = dists or [1.0] * len(angles)
    users = [User(a, d, k) for k, (a, d) in enumerate(zip(angles, dists))]
    return Scenario(grid, geom, users, snr, 0, m)


def test_friis_examples():
    assert friis_gain(300e9, 2.0) == pytest.approx(friis_gain(300e9, 1.0) / 2, rel=1e-15)
    assert friis_gain(600e9, 1.0) == pytest.approx(friis_gain(300e9, 1.0) / 2, rel=1e-15)
    # c / (4 pi d f) with c = 299792458
    assert friis_gain(300e9, 1.0) == pytest.approx(7.9522419320615704e-05, rel=1e-14)
    # with c rounded to 3e8 the same link gives 7.9577e-5
    assert 3e8 / (4 * math.pi * 300e9) == pytest.approx(7.9577e-5, rel=1e-4)


def test_user_validation():
    for bad in [(0.0, 1.0), (90.0, 1.0), (-3.0, 1.0), (30.0, 0.0), (30.0, -1.0)]:
        with pytest.raises(ConfigError):
            User(*bad)


def test_scenario_validation():
    with pytest.raises(ConfigError) as e:
        scenario([])
    assert e.value.code == "no_users"
    with pytest.raises(ConfigError) as e:
        scenario([30.0, 30.0])
    assert e.value.code == "duplicate_angles"
    with pytest.raises(ConfigError) as e:
        scenario([30.0], geom=WaveguideGeometry(1.0e-3, 0.02), grid=FrequencyGrid(0.1e12, 0.8e12, 8))
    assert e.value.code == "cutoff_violation"


def test_random_users_in_declared_ranges_and_reproducible():
    a = random_users(5, 200, 1, 0)
    b = random_users(5, 200, 1, 0)
    assert a == b
    ang = np.array([u.angle for u in a])
    dist = np.array([u.distance for u in a])
    assert ang.min() >= 10 and ang.max() < 80
    assert dist.min() >= 1 and dist.max() < 5
    assert random_users(6, 200, 1, 0) != a


def test_single_user_peaks_at_matched_bin():
    for theta in (15.0, 33.3, 61.0, 68.0):  # band reaches 13.6 to 69.6 degrees
        h = lwa_channel(scenario([theta]), include_distance=False)
        f_star = frequency_of_angle(GEOM, theta)
        nearest = np.argmin(np.abs(BAND.freqs - f_star))
        assert np.argmax(np.abs(h[0])) == nearest


def test_identical_users_identical_rows():
    # distinct-angle rule forbids exact duplicates in a Scenario; compare two scenarios instead
    h1 = lwa_channel(scenario([40.0, 20.0], [2.0, 1.0]), normalize=False)
    h2 = lwa_channel(scenario([40.0, 70.0], [2.0, 3.0]), normalize=False)
    assert np.array_equal(h1[0], h2[0])


def test_lwa_fixture_3x8():
    grid = FrequencyGrid(0.25e12, 0.6e12, 8)
    sc = scenario([20.0, 45.0, 70.0], [1.0, 2.5, 4.0], grid=grid)
    h = lwa_channel(sc)
    raw = np.empty((3, 8), complex)
    for k, u in enumerate(sc.users):
        for n, f in enumerate(grid.freqs):
            raw[k, n] = complex(aperture_gain(GEOM, f, u.angle)) * C / (4 * math.pi * u.distance * f)
    ref = raw / math.sqrt(np.mean(np.abs(raw) ** 2))
    np.testing.assert_allclose(h, ref, rtol=1e-12, atol=0)


def test_normalization_unit_mean():
    sc = Scenario(BAND, GEOM, random_users(3, 8, 1, 0), 10.0, 3, 32)
    h = lwa_channel(sc)
    g = mimo_channel(sc)
    assert abs(np.mean(np.abs(h) ** 2) - 1) < 1e-12
    assert abs(np.mean(np.abs(g) ** 2) - 1) < 1e-12
    assert np.all(np.isfinite(h)) and np.all(np.isfinite(g))


def test_mimo_fixture_k2_m4_n4():
    grid = FrequencyGrid(0.3e12, 0.6e12, 4)
    sc = scenario([25.0, 65.0], [1.5, 3.0], grid=grid, m=4)
    g = mimo_channel(sc)
    delta = C / (2 * 0.6e12)
    raw = np.empty((2, 4, 4), complex)
    for k, u in enumerate(sc.users):
        for m in range(4):
            for n, f in enumerate(grid.freqs):
                amp = C / (4 * math.pi * u.distance * f)
                raw[k, m, n] = amp * np.exp(-2j * math.pi * f * m * delta * math.cos(math.radians(u.angle)) / C)
    ref = raw / math.sqrt(np.mean(np.abs(raw) ** 2))
    np.testing.assert_allclose(g, ref, rtol=1e-12, atol=1e-15)
    assert element_spacing(grid) == pytest.approx(delta)


def test_mimo_single_antenna_is_friis():
    sc = scenario([30.0, 50.0], [1.0, 2.0], m=1)
    g = mimo_channel(sc, normalize=False)
    ref = friis_gain(BAND.freqs[None, :], sc.distances[:, None])
    np.testing.assert_allclose(g[:, 0, :], ref, rtol=1e-15)


def test_mimo_unit_modulus_structure():
    sc = scenario([12.0, 47.0, 89.9], [1.0, 2.0, 3.0], m=16)
    g = mimo_channel(sc)
    mag = np.abs(g)
    np.testing.assert_allclose(mag, mag[:, :1, :].repeat(16, axis=1), rtol=1e-13)


def test_mimo_broadside_in_phase():
    sc = scenario([89.999999999])
    g = mimo_channel(sc, normalize=False)
    phase = np.angle(g[0] / g[0, :1])
    assert np.max(np.abs(phase)) < 1e-6


def test_synthesis_is_pure():
    sc = Scenario(BAND, GEOM, random_users(9, 4, 1, 0), 5.0, 9, 8)
    a, b = synthesize(sc), synthesize(sc)
    assert np.array_equal(a.lwa, b.lwa) and np.array_equal(a.mimo, b.mimo)


def test_snr_convention_monte_carlo():
    # unit power per bin over a unit-mean channel: received SNR averages snr_db
    sc = Scenario(BAND, GEOM, random_users(1, 8, 1, 0), 0.0, 1, 32)
    h = lwa_channel(sc)
    shape = (64, sc.n_users, BAND.n_bins)
    x = rng.qpsk(rng.stream(sc.seed, 9, 0), shape)
    w = rng.awgn(sc.seed, shape, 9, 1) * math.sqrt(noise_variance(sc.snr_db))
    measured = np.mean(np.abs(h * x) ** 2) / np.mean(np.abs(w) ** 2)
    assert abs(measured - 1.0) < 0.02
    assert noise_variance(10.0) == pytest.approx(0.1)


@settings(max_examples=30, deadline=None)
@given(angle=st.floats(14.0, 69.0), dist=st.floats(0.5, 10.0))
def test_lwa_row_magnitude_peaks_near_beam(angle, dist):
    h = lwa_channel(scenario([angle], [dist]), include_distance=False, normalize=False)
    peak_f = BAND.freqs[np.argmax(np.abs(h[0]))]
    assert abs(beam_angle(GEOM, peak_f) - angle) < 0.5


def test_sum_rate_uses_channel_from_scenario():
    sc = scenario([30.0])
    h = lwa_channel(sc)
    plan = AllocationPlan(np.zeros(BAND.n_bins, int), np.zeros(BAND.n_bins), float(BAND.n_bins))
    assert sum_rate(h, plan, 1.0).total == 0.0
