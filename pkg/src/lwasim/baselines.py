"""Array baselines for the sum-rate comparison.

Channels are (K, M, N) tensors ``g[k, m, n]``; user ``k`` on bin ``n``
receives ``g[k, :, n]^H x`` for transmit vector ``x``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .allocation import waterfill

RIDGE = 1e-12
MAX_SWEEPS = 100
SWEEP_RTOL = 1e-8


@dataclass
class ZFResult:
    rate: float  # bits/s/Hz averaged over bins
    powers: np.ndarray  # (K, N); zero for users not served on a bin
    gains: np.ndarray  # (K, N) effective SNR gains of the served streams
    residual_interference: float
    rank_deficient_bins: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    @property
    def flagged(self) -> bool:
        return self.rank_deficient_bins.size > 0


def zf_precoders(h: np.ndarray):
    """Unit-norm zero-forcing precoders for a stack of (N, K, M) channel matrices.

    Rows of ``h[n]`` are the conjugated user channels ``g_k^H``.  Returns the
    (N, M, K) precoders and the indices of bins that needed the ridge.
    """
    n_bins, k_users, _ = h.shape
    w = np.linalg.pinv(h)
    ranks = np.linalg.matrix_rank(h)
    deficient = np.flatnonzero(ranks < k_users)
    if deficient.size:
        hd = h[deficient]
        gram = hd @ hd.conj().transpose(0, 2, 1) + RIDGE * np.eye(k_users)
        w[deficient] = hd.conj().transpose(0, 2, 1) @ np.linalg.inv(gram)
    w = w / np.linalg.norm(w, axis=1, keepdims=True)
    return w, deficient


@dataclass
class ZFStreams:
    """SNR-independent part of greedy zero-forcing.

    ``order[n]`` ranks the users of bin ``n`` by greedy orthogonal selection
    (largest channel component orthogonal to the users already chosen).
    ``prefix_gains[j][n]`` holds the zero-forcing channel gains of the first
    ``j + 1`` users of that order.
    """

    order: np.ndarray  # (N, J)
    prefix_gains: list


def greedy_order(h: np.ndarray, n_select: int) -> np.ndarray:
    """Greedy Gram-Schmidt user ordering for (N, K, M) channel rows."""
    n_bins, k_users, _ = h.shape
    resid = h.copy()
    taken = np.zeros((n_bins, k_users), dtype=bool)
    order = np.empty((n_bins, n_select), dtype=int)
    bins = np.arange(n_bins)
    for i in range(n_select):
        norms = np.where(taken, -1.0, np.linalg.norm(resid, axis=2))
        k = np.argmax(norms, axis=1)
        order[:, i] = k
        taken[bins, k] = True
        q = resid[bins, k]
        qn = np.linalg.norm(q, axis=1, keepdims=True)
        q = np.divide(q, qn, out=np.zeros_like(q), where=qn > 0)
        resid -= np.einsum("nkm,nm->nk", resid, q.conj())[:, :, None] * q[:, None, :]
    return order


def zf_streams(g: np.ndarray) -> ZFStreams:
    k_users, m_ant, n_bins = g.shape
    h = np.conj(g).transpose(2, 0, 1)  # (N, K, M)
    n_select = min(k_users, m_ant)
    order = greedy_order(h, n_select)
    bins = np.arange(n_bins)[:, None]
    prefix = []
    for j in range(1, n_select + 1):
        hs = h[bins, order[:, :j]]  # (N, j, M)
        # diag((H H^H)^-1) = squared row norms of R^-1 with H^H = QR
        r = np.linalg.qr(hs.conj().transpose(0, 2, 1), mode="r")
        diag = np.abs(np.einsum("nii->ni", r))
        with np.errstate(divide="ignore", invalid="ignore"):
            tiny = diag <= np.finfo(float).eps * diag.max(axis=1, keepdims=True) * m_ant
            rinv = np.linalg.inv(np.where(tiny[:, None, :] & np.eye(j, dtype=bool), 1.0, r))
            gains = 1.0 / np.sum(np.abs(rinv) ** 2, axis=2)
        gains[tiny.any(axis=1)] = 0.0
        prefix.append(gains)
    return ZFStreams(order, prefix)


def zf_sum_rate(
    g: np.ndarray,
    total_power: float,
    noise_var: float,
    selection: str = "greedy",
    power: str = "global",
    streams: ZFStreams | None = None,
) -> ZFResult:
    """Fully digital zero-forcing sum rate.

    ``selection="greedy"`` serves, on each bin, the prefix of the greedy
    user order that maximizes the bin's rate under an equal power share, so
    weak or nearly collinear users are not nulled at the expense of the
    others.  ``selection="all"`` zero-forces every user and falls back to a
    ridge-regularized inverse on rank-deficient bins (flagged).

    ``power="global"`` water-fills ``total_power`` over all served streams;
    ``power="per-bin"`` gives each bin ``total_power / N`` and water-fills
    it over that bin's users.
    """
    k_users, m_ant, n_bins = g.shape
    if m_ant < k_users:
        raise ValueError(f"zero-forcing needs M >= K, got M={m_ant}, K={k_users}")
    if power not in ("global", "per-bin"):
        raise ValueError(f"unknown power policy {power!r}")
    if selection == "all":
        return _zf_all_users(g, total_power, noise_var, power)
    if selection != "greedy":
        raise ValueError(f"unknown selection policy {selection!r}")

    if streams is None:
        streams = zf_streams(g)
    share = total_power / n_bins
    proxy = np.stack(
        [np.log2(1.0 + share / (j + 1) * gj / noise_var).sum(axis=1) for j, gj in enumerate(streams.prefix_gains)],
        axis=1,
    )
    n_served = np.argmax(proxy, axis=1) + 1  # ties keep the smaller set
    gains = np.zeros((n_bins, k_users))
    for j in np.unique(n_served):
        rows = np.flatnonzero(n_served == j)
        gains[rows[:, None], streams.order[rows, :j]] = streams.prefix_gains[j - 1][rows]
    gains /= noise_var

    if power == "global":
        powers = waterfill(gains.ravel(), total_power).powers.reshape(n_bins, k_users)
    else:
        powers = np.zeros_like(gains)
        for n in range(n_bins):
            if np.any(gains[n] > 0):
                powers[n] = waterfill(gains[n], share).powers
    rate = float(np.log2(1.0 + powers * gains).sum() / n_bins)
    residual = _greedy_residual(g, streams, n_served)
    return ZFResult(rate, powers.T, gains.T, residual)


def _greedy_residual(g, streams, n_served) -> float:
    """Largest leakage ``|g_j^H w_k|`` between served users, over well-conditioned bins."""
    h = np.conj(g).transpose(2, 0, 1)
    worst = 0.0
    for j in np.unique(n_served):
        if j == 1:
            continue
        rows = np.flatnonzero(n_served == j)
        hs = h[rows[:, None], streams.order[rows, :j]]
        w = np.linalg.pinv(hs)
        w /= np.linalg.norm(w, axis=1, keepdims=True)
        eff = np.abs(hs @ w)
        eff[:, np.arange(j), np.arange(j)] = 0.0
        worst = max(worst, float(eff.max()))
    return worst


def _zf_all_users(g, total_power, noise_var, power) -> ZFResult:
    k_users, m_ant, n_bins = g.shape
    h = np.conj(g).transpose(2, 0, 1)  # (N, K, M)
    w, deficient = zf_precoders(h)
    eff = h @ w  # (N, K, K); diagonal is the useful signal
    signal = np.abs(np.einsum("nkk->nk", eff)) ** 2
    cross = np.abs(eff) ** 2
    cross[:, np.arange(k_users), np.arange(k_users)] = 0.0
    clean = np.setdiff1d(np.arange(n_bins), deficient)
    residual = float(np.sqrt(cross[clean].max())) if clean.size else 0.0

    gains = signal / noise_var
    if power == "global":
        powers = waterfill(gains.ravel(), total_power).powers.reshape(n_bins, k_users)
    else:
        powers = np.zeros((n_bins, k_users))
        for n in range(n_bins):
            if np.any(gains[n] > 0):
                powers[n] = waterfill(gains[n], total_power / n_bins).powers
    interference = np.einsum("nkj,nj->nk", cross, powers)
    sinr = powers * signal / (noise_var + interference)
    rate = float(np.log2(1.0 + sinr).sum() / n_bins)
    return ZFResult(rate, powers.T, gains.T, residual, deficient)


def analog_gains(g: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``|g[k, :, n]^H w|^2`` for every user and bin, shape (K, N)."""
    return np.abs(np.einsum("kmn,m->kn", np.conj(g), w)) ** 2


def beam_objective(g: np.ndarray, w: np.ndarray) -> float:
    """Aggregate analog beamforming gain ``sum_n max_k |g_kn^H w|^2``."""
    return float(analog_gains(g, w).max(axis=0).sum())


@dataclass
class AnalogBeam:
    weights: np.ndarray  # unit-modulus, length M
    history: list  # objective after initialization and after each sweep
    initial: np.ndarray


def initial_beam(g: np.ndarray) -> np.ndarray:
    """Entrywise phase of the principal eigenvector of ``sum_kn g g^H``."""
    k_users, m_ant, n_bins = g.shape
    flat = g.transpose(1, 0, 2).reshape(m_ant, k_users * n_bins)
    cov = flat @ flat.conj().T
    _, vecs = np.linalg.eigh(cov)
    v = vecs[:, -1]
    phase = np.angle(v)
    return np.exp(1j * phase)


def optimize_analog_beam(
    g: np.ndarray, max_sweeps: int = MAX_SWEEPS, rtol: float = SWEEP_RTOL, w0: np.ndarray | None = None
) -> AnalogBeam:
    """Cyclic coordinate ascent on the phases of a single analog beamformer.

    With the served user of every bin held fixed, the best phase of element
    ``m`` has a closed form: it aligns the element's contribution with the
    rest of the beam summed over bins.  Served users are re-selected after
    each coordinate update, so the objective never decreases.
    """
    k_users, m_ant, n_bins = g.shape
    w = initial_beam(g) if w0 is None else np.asarray(w0, dtype=complex).copy()
    start = w.copy()
    gc = np.conj(g)
    z = np.einsum("kmn,m->kn", gc, w)  # (K, N) inner products g^H w
    bins = np.arange(n_bins)
    history = [float((np.abs(z) ** 2).max(axis=0).sum())]
    for _ in range(max_sweeps):
        for m in range(m_ant):
            served = np.argmax(np.abs(z), axis=0)
            t = gc[served, m, bins]
            s = z[served, bins] - t * w[m]
            c = np.sum(np.conj(s) * t)
            if c == 0:
                continue
            new = np.exp(-1j * np.angle(c))
            z += gc[:, m, :] * (new - w[m])
            w[m] = new
        history.append(float((np.abs(z) ** 2).max(axis=0).sum()))
        if history[-1] - history[-2] <= rtol * abs(history[-2]):
            break
    return AnalogBeam(w, history, start)


@dataclass
class HybridResult:
    rate: float
    served: np.ndarray  # (N,) user served on each bin
    powers: np.ndarray  # (N,)
    beam: AnalogBeam


def hybrid_rate_for_beam(g: np.ndarray, w: np.ndarray, total_power: float, noise_var: float):
    k_users, m_ant, n_bins = g.shape
    gains = analog_gains(g, w) / m_ant  # |w|^2 = M, scaled to unit transmit power
    served = np.argmax(gains, axis=0)
    best = gains[served, np.arange(n_bins)] / noise_var
    powers = waterfill(best, total_power).powers
    rate = float(np.log2(1.0 + powers * best).sum() / n_bins)
    return rate, served, powers


def hybrid_single_rf_sum_rate(
    g: np.ndarray, total_power: float, noise_var: float, beam: AnalogBeam | None = None
) -> HybridResult:
    """Single RF chain behind one frequency-flat phase-shifter beam.

    Each bin serves the user with the strongest analog gain; power is
    water-filled across bins.  The beam does not depend on the SNR, so a
    precomputed ``beam`` may be passed when sweeping it.
    """
    if beam is None:
        beam = optimize_analog_beam(g)
    rate, served, powers = hybrid_rate_for_beam(g, beam.weights, total_power, noise_var)
    return HybridResult(rate, served, powers, beam)
