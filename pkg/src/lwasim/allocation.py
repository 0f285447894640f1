"""Frequency-division downlink over a single leaky-wave antenna.

Each subcarrier serves at most one user.  For the FDMA sum-rate objective
the optimum decouples: give every bin to the user with the largest gain
(any other choice lowers that bin's effective gain for every power level),
then water-fill the power budget over the resulting per-bin gains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .channel import Scenario, lwa_channel
from .errors import InfeasibleError
from .physics import WaveguideGeometry, aperture_gain, cutoff_frequency

UNASSIGNED = -1
ENERGY_FLOOR_DB = -120.0


@dataclass
class AllocationPlan:
    assignment: np.ndarray  # bin -> user index, UNASSIGNED for idle bins
    powers: np.ndarray
    budget: float

    def validate(self, n_users: int | None = None, rtol: float = 1e-9) -> None:
        a = np.asarray(self.assignment)
        p = np.asarray(self.powers)
        if a.shape != p.shape:
            raise ValueError("assignment and powers must have one entry per bin")
        if np.any(p < 0):
            raise ValueError("negative power")
        if np.any(p[a == UNASSIGNED] != 0):
            raise ValueError("power on an unassigned bin")
        if n_users is not None and np.any(a >= n_users):
            raise ValueError("assignment refers to a nonexistent user")
        if p.sum() > self.budget * (1 + rtol):
            raise ValueError(f"power {p.sum()} exceeds budget {self.budget}")


def assign_subcarriers(h: np.ndarray, policy: str = "max-gain") -> np.ndarray:
    """Map every bin of the (K, N) channel ``h`` to a user.

    ``"max-gain"`` picks the strongest user per bin (lowest index on ties).
    ``"fair"`` starts from that map and moves the cheapest bins, measured by
    gain loss in dB, to starved users until each holds at least
    ``max(1, N // (2K))`` bins.
    """
    h = np.asarray(h)
    k_users, n_bins = h.shape
    if k_users < 1:
        raise InfeasibleError("no users")
    power = np.abs(h) ** 2
    assignment = np.argmax(power, axis=0)  # argmax returns the first maximum
    if policy == "max-gain":
        return assignment
    if policy != "fair":
        raise ValueError(f"unknown assignment policy {policy!r}")
    if n_bins < k_users:
        raise InfeasibleError(f"fair policy needs N >= K, got N={n_bins}, K={k_users}")

    quota = max(1, n_bins // (2 * k_users))
    with np.errstate(divide="ignore"):
        log_power = np.log10(power)
    counts = np.bincount(assignment, minlength=k_users)
    while np.any(counts < quota):
        k = int(np.flatnonzero(counts < quota)[0])
        donors = (counts[assignment] > quota) & (assignment != k)
        if not donors.any():
            raise InfeasibleError("no bins left to reassign")
        cost = np.where(donors, log_power[assignment, np.arange(n_bins)] - log_power[k], np.inf)
        cost = np.nan_to_num(cost, nan=np.inf)
        n = int(np.argmin(cost))
        counts[assignment[n]] -= 1
        assignment[n] = k
        counts[k] += 1
    return assignment


class WaterLevel(NamedTuple):
    powers: np.ndarray
    level: float


def waterfill(gains, budget: float) -> WaterLevel:
    """Exact water-filling ``p_n = max(0, mu - 1/gamma_n)`` with ``sum p = budget``.

    ``gains`` are effective SNR gains (channel power over noise).  The water
    level is located by walking the sorted breakpoints ``1/gamma``; there is
    no iterative tolerance.
    """
    g = np.asarray(gains, dtype=float)
    if np.any(g < 0) or not np.all(np.isfinite(g)):
        raise ValueError("gains must be finite and non-negative")
    if not budget > 0:
        raise ValueError("budget must be positive")
    order = np.argsort(-g, kind="stable")
    g_sorted = g[order]
    if not g_sorted[0] > 0:
        raise InfeasibleError("all gains are zero; nothing to allocate")
    # a bin can only be active below the level reached with all power on the best bin
    with np.errstate(divide="ignore", over="ignore"):
        floors = 1.0 / g_sorted
    n_pos = int(np.count_nonzero(floors < floors[0] + budget))
    floors = floors[:n_pos]
    # level that spreads the budget over the m strongest bins
    levels = (budget + np.cumsum(floors)) / np.arange(1, n_pos + 1)
    active = int(np.flatnonzero(levels > floors)[-1]) + 1
    mu = float(levels[active - 1])

    p_sorted = np.zeros_like(g_sorted)
    p_sorted[:active] = mu - floors[:active]
    powers = np.empty_like(p_sorted)
    powers[order] = p_sorted
    return WaterLevel(powers, mu)


def kkt_residual(gains, powers, level: float) -> float:
    """Largest deviation of ``p + 1/gamma`` from the water level over active bins."""
    g = np.asarray(gains, dtype=float)
    p = np.asarray(powers, dtype=float)
    on = p > 0
    if not on.any():
        return 0.0
    return float(np.max(np.abs(p[on] + 1.0 / g[on] - level)))


class RateReport(NamedTuple):
    total: float  # bits/s/Hz, averaged over bins
    per_user: np.ndarray


def bin_gains(h: np.ndarray, assignment: np.ndarray, noise_var: float) -> np.ndarray:
    a = np.asarray(assignment)
    n = np.arange(h.shape[1])
    served = np.where(a == UNASSIGNED, 0.0, np.abs(h[np.maximum(a, 0), n]) ** 2)
    return served / noise_var


def sum_rate(h: np.ndarray, plan: AllocationPlan, noise_var: float) -> RateReport:
    """Per-bin normalized sum rate ``(1/N) sum_n log2(1 + p_n |h[a(n), n]|^2 / sigma^2)``."""
    k_users, n_bins = h.shape
    per_bin = np.log2(1.0 + plan.powers * bin_gains(h, plan.assignment, noise_var))
    a = np.asarray(plan.assignment)
    per_user = np.zeros(k_users)
    np.add.at(per_user, a[a != UNASSIGNED], per_bin[a != UNASSIGNED] / n_bins)
    return RateReport(float(per_bin.sum() / n_bins), per_user)


def allocate(
    h: np.ndarray, noise_var: float, budget: float | None = None, policy: str = "max-gain"
) -> AllocationPlan:
    """Assignment followed by water-filling; ``budget`` defaults to one unit per bin."""
    n_bins = h.shape[1]
    budget = float(n_bins) if budget is None else float(budget)
    assignment = assign_subcarriers(h, policy)
    gains = bin_gains(h, assignment, noise_var)
    powers = waterfill(gains, budget).powers
    plan = AllocationPlan(assignment, powers, budget)
    plan.validate(h.shape[0])
    return plan


class TuneResult(NamedTuple):
    geom: WaveguideGeometry
    rate: float
    scores: np.ndarray  # (len(plate_seps), len(slit_lens)); -inf where infeasible


def tune_geometry(
    scenario: Scenario,
    plate_seps: Sequence[float],
    slit_lens: Sequence[float],
    leak_alpha: float | None = None,
    policy: str = "max-gain",
) -> TuneResult:
    """Exhaustive search over plate separation and slit length for the best sum rate.

    Geometries whose cutoff is not below the band score ``-inf``.  Ties go
    to the smaller plate separation, then the smaller slit length.
    """
    b_vals = sorted(float(b) for b in plate_seps)
    l_vals = sorted(float(length) for length in slit_lens)
    if not b_vals or not l_vals:
        raise ValueError("geometry search grid is empty")
    scores = np.full((len(b_vals), len(l_vals)), -np.inf)
    best = None
    for i, b in enumerate(b_vals):
        for j, length in enumerate(l_vals):
            geom = WaveguideGeometry(b, length, leak_alpha)
            if cutoff_frequency(geom) >= scenario.grid.f_min:
                continue
            h = lwa_channel(scenario.with_geometry(geom))
            plan = allocate(h, scenario.noise_var, policy=policy)
            scores[i, j] = sum_rate(h, plan, scenario.noise_var).total
            if best is None or scores[i, j] > best[1]:
                best = (geom, scores[i, j])
    if best is None:
        raise InfeasibleError("no geometry in the search grid has its cutoff below the band")
    return TuneResult(best[0], float(best[1]), scores)


def beampattern_field(scenario: Scenario, plan: AllocationPlan, angle_grid) -> np.ndarray:
    """Radiated energy ``p_n |G(f_n, phi)|^2`` in dB relative to its maximum.

    Returns an array of shape (len(angle_grid), N); zero energy maps to
    ``ENERGY_FLOOR_DB``.
    """
    phi = np.asarray(angle_grid, dtype=float)
    if np.any((phi <= 0) | (phi >= 90)):
        raise ValueError("angle grid must lie inside (0, 90) degrees")
    f = scenario.grid.freqs
    energy = np.asarray(plan.powers)[None, :] * np.abs(aperture_gain(scenario.geom, f[None, :], phi[:, None])) ** 2
    peak = energy.max()
    if not peak > 0:
        return np.full(energy.shape, ENERGY_FLOOR_DB)
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(energy / peak)
    return np.maximum(db, ENERGY_FLOOR_DB)


def column_peaks(field_db: np.ndarray, angle_grid) -> tuple[np.ndarray, np.ndarray]:
    """Peak angle and height of every frequency column.

    The grid maximum is refined by a three-point parabola on the dB values,
    which removes the ripple a coarse angle grid imposes on both outputs.
    """
    field_db = np.asarray(field_db, dtype=float)
    angle_grid = np.asarray(angle_grid, dtype=float)
    cols = np.arange(field_db.shape[1])
    i = np.clip(np.argmax(field_db, axis=0), 1, field_db.shape[0] - 2)
    y0, y1, y2 = field_db[i - 1, cols], field_db[i, cols], field_db[i + 1, cols]
    denom = y0 - 2.0 * y1 + y2
    with np.errstate(divide="ignore", invalid="ignore"):
        offset = np.where(denom < 0, 0.5 * (y0 - y2) / denom, 0.0)
    offset = np.clip(offset, -0.5, 0.5)
    step = angle_grid[i + 1] - angle_grid[i]
    return angle_grid[i] + offset * step, y1 - 0.25 * (y0 - y2) * offset


def ridge_peaks(field_db: np.ndarray, angle_grid, assignment) -> np.ndarray:
    """Angle of each served user's beam ridge in an energy map.

    A user's ridge is the set of columns assigned to it; its crest is the
    column whose (refined) peak energy is largest, and the ridge is reported
    at that column's peak angle.  Users without bins have no ridge.
    Returned angles are sorted.
    """
    assignment = np.asarray(assignment)
    peak_angle, peak_db = column_peaks(field_db, angle_grid)
    crests = []
    for k in np.unique(assignment[assignment != UNASSIGNED]):
        bins = np.flatnonzero(assignment == k)
        crests.append(int(bins[np.argmax(peak_db[bins])]))
    return np.sort(peak_angle[crests])
