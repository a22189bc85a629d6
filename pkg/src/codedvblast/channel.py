"""Fading-channel statistics for zero-forcing V-BLAST with successive cancellation.

After nulling the not-yet-detected streams and cancelling the detected
ones, stream ``i`` sees a scalar channel with power gain
``g_i = |h_{i,perp}|**2``, the squared norm of column ``i`` projected onto
the orthogonal complement of columns ``i+1..m``.  In i.i.d. Rayleigh fading
``g_i`` is Erlang with shape ``n - m + i`` and unit rate, so each stream
behaves like an MRC combiner of order ``n - m + i``.

Monte Carlo seeding
-------------------
Trials are grouped into fixed blocks of :data:`BLOCK_SIZE`.  Block ``b`` of a
run with master seed ``s`` draws from
``numpy.random.default_rng(SeedSequence(s, spawn_key=(b,)))``.  A shard is a
contiguous range of blocks, so any split of the blocks across workers sums to
exactly the same outage count as a single serial run.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import special

__all__ = [
    "BLOCK_SIZE",
    "SystemConfig",
    "ChannelSample",
    "MonteCarloEstimate",
    "mrc_outage_cdf",
    "erlang_pdf",
    "effective_gains",
    "sample_channel_gains",
    "count_outages",
    "monte_carlo_outage",
]

BLOCK_SIZE = 8192


@dataclass(frozen=True)
class SystemConfig:
    """Antenna counts and SNR of an ``n x m`` coded ZF V-BLAST link.

    Parameters
    ----------
    n, m : int
        Receive and transmit antenna counts, ``n >= m >= 1``.
    gamma0 : float
        Average SNR (linear).
    gap : float
        SNR gap to capacity (linear, ``>= 1``).  Every formula downstream
        uses the effective SNR ``snr = gamma0 / gap``.
    """

    n: int
    m: int
    gamma0: float
    gap: float = 1.0
    snr: float = field(init=False, repr=False)

    def __post_init__(self):
        if int(self.m) != self.m or int(self.n) != self.n:
            raise ValueError("antenna counts must be integers")
        if not 1 <= self.m <= self.n:
            raise ValueError(f"need n >= m >= 1, got n={self.n}, m={self.m}")
        if not self.gamma0 > 0:
            raise ValueError(f"gamma0 must be positive, got {self.gamma0}")
        if not self.gap >= 1:
            raise ValueError(f"SNR gap must be >= 1, got {self.gap}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "snr", float(self.gamma0) / float(self.gap))

    @classmethod
    def from_db(cls, n: int, m: int, snr_db: float, gap_db: float = 0.0) -> "SystemConfig":
        return cls(n, m, 10.0 ** (snr_db / 10.0), 10.0 ** (gap_db / 10.0))

    @property
    def snr_db(self) -> float:
        """Effective SNR in dB."""
        return 10.0 * math.log10(self.snr)

    @property
    def orders(self) -> np.ndarray:
        """Diversity order ``n - m + i`` of each stream, i = 1..m."""
        return self.n - self.m + np.arange(1, self.m + 1)

    def with_snr(self, snr: float) -> "SystemConfig":
        """Same antennas and gap, effective SNR replaced by ``snr``."""
        return SystemConfig(self.n, self.m, snr * self.gap, self.gap)


@dataclass
class ChannelSample:
    """Effective post-projection stream gains of one or more realizations.

    ``gains`` has shape ``(m,)`` for one realization or ``(trials, m)`` for a
    batch.  ``resampled`` counts degenerate draws that were replaced.
    """

    gains: np.ndarray
    resampled: int = 0


@dataclass(frozen=True)
class MonteCarloEstimate:
    p_out: float
    stderr: float
    trials: int
    seed: int
    outages: int = 0


def mrc_outage_cdf(k, x):
    """Outage probability of a k-th order MRC combiner.

    ``F_k(x) = 1 - exp(-x) * sum_{l<k} x**l / l!``, evaluated as the
    regularized lower incomplete gamma function so that it keeps full
    relative accuracy for tiny ``x`` and large ``k``.
    """
    k_arr = np.asarray(k)
    x_arr = np.asarray(x, dtype=float)
    if np.any(k_arr < 1) or np.any(k_arr != np.floor(k_arr)):
        raise ValueError("MRC order k must be an integer >= 1")
    if np.any(x_arr < 0) or np.any(np.isnan(x_arr)):
        raise ValueError("MRC outage argument must be >= 0")
    out = special.gammainc(k_arr.astype(float), x_arr)
    return float(out) if out.ndim == 0 else out


def erlang_pdf(k, x):
    """Unit-rate Erlang density, the derivative of :func:`mrc_outage_cdf` in ``x``."""
    k_arr = np.asarray(k, dtype=float)
    x_arr = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        logp = (k_arr - 1.0) * np.log(x_arr) - x_arr - special.gammaln(k_arr)
        out = np.where(x_arr > 0, np.exp(logp), np.where(k_arr == 1, 1.0, 0.0))
    out = np.where(np.isinf(x_arr), 0.0, out)
    return float(out) if out.ndim == 0 else out


def effective_gains(H: np.ndarray) -> np.ndarray:
    """Post-nulling gains ``g_i`` of channel matrices ``H`` (shape ``(..., n, m)``).

    The columns are reversed so that column ``i`` comes after columns
    ``i+1..m``; the QR diagonal then holds the norm of each column projected
    off everything before it.
    """
    H = np.asarray(H)
    r = np.linalg.qr(H[..., ::-1], mode="r")
    diag = np.abs(np.diagonal(r, axis1=-2, axis2=-1)) ** 2
    return diag[..., ::-1]


def _draw_channels(rng: np.random.Generator, n: int, m: int, size: int) -> np.ndarray:
    # unit total variance per complex entry
    re = rng.standard_normal((size, n, m))
    im = rng.standard_normal((size, n, m))
    return (re + 1j * im) * math.sqrt(0.5)


def sample_channel_gains(cfg: SystemConfig, rng: np.random.Generator, size: int | None = None,
                         channel: np.ndarray | None = None) -> ChannelSample:
    """Draw effective stream gains for i.i.d. Rayleigh fading.

    Parameters
    ----------
    cfg : SystemConfig
    rng : numpy.random.Generator
    size : int, optional
        Number of realizations.  ``None`` returns a single ``(m,)`` vector.
    channel : ndarray, optional
        Deterministic channel matrix ``(n, m)`` to use instead of a random
        draw (``rng`` is then unused).

    Returns
    -------
    ChannelSample
    """
    if channel is not None:
        H = np.asarray(channel)
        if H.shape[-2:] != (cfg.n, cfg.m):
            raise ValueError(f"channel must be {cfg.n}x{cfg.m}, got {H.shape}")
        return ChannelSample(effective_gains(H))

    count = 1 if size is None else int(size)
    gains = effective_gains(_draw_channels(rng, cfg.n, cfg.m, count))
    resampled = 0
    bad = ~np.all(np.isfinite(gains) & (gains > 0), axis=1)
    while np.any(bad):
        idx = np.flatnonzero(bad)
        resampled += idx.size
        gains[idx] = effective_gains(_draw_channels(rng, cfg.n, cfg.m, idx.size))
        bad = ~np.all(np.isfinite(gains) & (gains > 0), axis=1)
    if size is None:
        gains = gains[0]
    return ChannelSample(gains, resampled)


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block,)))


def count_outages(cfg: SystemConfig, powers, rates, trials: int, seed: int,
                  blocks: range | None = None) -> tuple[int, int]:
    """Count outage events over a shard of trial blocks.

    Returns ``(outages, trials_in_shard)``.  ``blocks`` defaults to every
    block of a run of ``trials`` trials.
    """
    powers = np.asarray(powers, dtype=float)
    rates = np.asarray(rates, dtype=float)
    n_blocks = -(-trials // BLOCK_SIZE)
    if blocks is None:
        blocks = range(n_blocks)
    need = rates > 0
    outages = 0
    done = 0
    for b in blocks:
        size = min(BLOCK_SIZE, trials - b * BLOCK_SIZE)
        if size <= 0:
            continue
        g = sample_channel_gains(cfg, _block_rng(seed, b), size).gains
        with np.errstate(over="ignore"):
            cap = np.log1p(powers * g * cfg.snr)
        fail = np.any(need & (cap < rates), axis=1)
        outages += int(np.count_nonzero(fail))
        done += size
    return outages, done


def monte_carlo_outage(cfg: SystemConfig, alloc, trials: int, seed: int,
                       shards: int = 1, workers: int = 1) -> MonteCarloEstimate:
    """Estimate system outage of ``alloc`` by simulating capacities per stream.

    A trial is an outage when any stream with positive target rate has
    ``ln(1 + alpha_i g_i snr) < R_i``.  The estimate depends only on
    ``(trials, seed)``; ``shards`` and ``workers`` only change how the
    blocks are scheduled.
    """
    if int(trials) != trials or trials < 1:
        raise ValueError(f"trials must be a positive integer, got {trials}")
    trials = int(trials)
    powers = np.asarray(alloc.powers, dtype=float)
    rates = np.asarray(alloc.rates, dtype=float)
    if powers.shape != (cfg.m,) or rates.shape != (cfg.m,):
        raise ValueError("allocation does not match the configuration")

    n_blocks = -(-trials // BLOCK_SIZE)
    shards = max(1, min(int(shards), n_blocks))
    edges = np.linspace(0, n_blocks, shards + 1).round().astype(int)
    parts = [range(edges[j], edges[j + 1]) for j in range(shards)]

    def run(part):
        return count_outages(cfg, powers, rates, trials, seed, part)

    if workers > 1 and shards > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, parts))
    else:
        results = [run(p) for p in parts]
    outages = sum(r[0] for r in results)
    p = outages / trials
    return MonteCarloEstimate(p, math.sqrt(p * (1.0 - p) / trials), trials, int(seed), outages)
