"""Analytic outage probabilities of coded ZF V-BLAST.

Stream ``i`` with power ``alpha_i`` and target rate ``R_i`` (nats) is in
outage with probability ``F_k((e^R_i - 1) / (alpha_i * snr))`` where
``k = n - m + i``.  The system is in outage when any stream is.  Every
quantity is available both exactly and in the first-order (low outage)
form ``x**k / k!`` that the closed-form allocations are derived from.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .channel import SystemConfig, erlang_pdf, mrc_outage_cdf

__all__ = [
    "Allocation",
    "OutageReport",
    "RateSpec",
    "DiversityReport",
    "outage_arguments",
    "stream_outage_exact",
    "stream_outage_approx",
    "stream_outages",
    "stream_outages_approx",
    "exact_outage",
    "approx_outage",
    "system_outage",
    "stream_outage_rate_derivative",
    "rate_derivatives",
    "exact_outage_gradient",
    "approx_outage_gradient",
    "diversity_fit",
]


@dataclass
class Allocation:
    """Per-stream powers and rates (nats/s/Hz)."""

    powers: np.ndarray
    rates: np.ndarray

    def __post_init__(self):
        self.powers = np.array(self.powers, dtype=float).reshape(-1)
        self.rates = np.array(self.rates, dtype=float).reshape(-1)
        if self.powers.shape != self.rates.shape:
            raise ValueError("powers and rates must have the same length")
        if np.any(self.powers < 0) or np.any(self.rates < 0):
            raise ValueError("powers and rates must be nonnegative")

    @classmethod
    def uniform(cls, m: int, rate: float) -> "Allocation":
        return cls(np.ones(m), np.full(m, float(rate)))

    @property
    def m(self) -> int:
        return self.powers.size

    @property
    def active(self) -> np.ndarray:
        return self.rates > 0

    @property
    def active_count(self) -> int:
        return int(np.count_nonzero(self.active))

    @property
    def total_power(self) -> float:
        return float(self.powers.sum())

    @property
    def total_rate(self) -> float:
        return float(self.rates.sum())

    def check(self, cfg: SystemConfig, total_rate: float | None = None, tol: float = 1e-9):
        """Raise ``ValueError`` unless the allocation is valid for ``cfg``."""
        if self.m != cfg.m:
            raise ValueError(f"allocation has {self.m} streams, configuration has {cfg.m}")
        if self.total_power > cfg.m * (1 + tol):
            raise ValueError(f"total power {self.total_power} exceeds budget {cfg.m}")
        if np.any((self.powers == 0) & (self.rates > 0)):
            raise ValueError("rate assigned to an unpowered stream")
        if total_rate is not None and abs(self.total_rate - total_rate) > tol * max(1.0, total_rate):
            raise ValueError(f"total rate {self.total_rate} != {total_rate}")


@dataclass(frozen=True)
class OutageReport:
    """Per-stream and system outage; ``system_approx`` is the first-order sum."""

    per_stream: np.ndarray
    system_exact: float
    system_approx: float

    @property
    def ber(self) -> float:
        # capacity-approaching codes: about half the bits of an outage block are lost
        return 0.5 * self.system_exact


@dataclass(frozen=True)
class RateSpec:
    """Target-rate specification.

    ``mode='fixed'`` gives a per-stream rate ``value`` in nats;
    ``mode='multiplexing'`` gives a multiplexing gain ``r`` in ``[0, m]``
    with per-stream rate ``(r/m) ln(1 + snr)``.
    """

    mode: str
    value: float

    def __post_init__(self):
        if self.mode not in ("fixed", "multiplexing"):
            raise ValueError(f"unknown rate mode {self.mode!r}")
        if not self.value >= 0:
            raise ValueError("rate / multiplexing gain must be nonnegative")

    @classmethod
    def fixed(cls, rate: float) -> "RateSpec":
        return cls("fixed", float(rate))

    @classmethod
    def multiplexing(cls, r: float) -> "RateSpec":
        return cls("multiplexing", float(r))

    @property
    def multiplexing_gain(self) -> float:
        return self.value if self.mode == "multiplexing" else 0.0

    def rate(self, cfg: SystemConfig) -> float:
        """Per-stream rate R in nats."""
        if self.mode == "fixed":
            return self.value
        if self.value > cfg.m:
            raise ValueError(f"multiplexing gain {self.value} exceeds m={cfg.m}")
        return self.value / cfg.m * math.log1p(cfg.snr)

    def total_rate(self, cfg: SystemConfig) -> float:
        return cfg.m * self.rate(cfg)


@dataclass(frozen=True)
class DiversityReport:
    slope: float
    window: tuple[float, float] | None
    residual: float


def _as_vectors(cfg: SystemConfig, powers, rates):
    powers = np.asarray(powers, dtype=float)
    rates = np.asarray(rates, dtype=float)
    if powers.shape != (cfg.m,) or rates.shape != (cfg.m,):
        raise ValueError(f"expected {cfg.m} powers and rates, got {powers.shape} and {rates.shape}")
    return powers, rates


def outage_arguments(cfg: SystemConfig, powers, rates) -> np.ndarray:
    """``x_i = (e^R_i - 1) / (alpha_i snr)``; 0 for zero rate, inf for zero power."""
    powers, rates = _as_vectors(cfg, powers, rates)
    with np.errstate(divide="ignore", invalid="ignore"):
        x = np.expm1(rates) / (powers * cfg.snr)
    x = np.where(rates == 0, 0.0, x)
    return np.where((powers == 0) & (rates > 0), np.inf, x)


def _approx_terms(k, x):
    k = np.asarray(k, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        out = np.exp(k * np.log(x) - special.gammaln(k + 1))
    return np.where(x == 0, 0.0, out)


def _check_index(i, cfg):
    if int(i) != i or not 1 <= i <= cfg.m:
        raise IndexError(f"stream index {i} outside 1..{cfg.m}")
    return cfg.n - cfg.m + int(i)


def _scalar_argument(cfg, alpha_i, rate_i):
    if alpha_i < 0 or rate_i < 0:
        raise ValueError("power and rate must be nonnegative")
    if rate_i == 0:
        return 0.0
    if alpha_i == 0:
        return math.inf
    return math.expm1(rate_i) / (alpha_i * cfg.snr)


def stream_outage_exact(i: int, cfg: SystemConfig, alpha_i: float, rate_i: float) -> float:
    """Outage probability of stream ``i`` (1-based)."""
    k = _check_index(i, cfg)
    return mrc_outage_cdf(k, _scalar_argument(cfg, alpha_i, rate_i))


def stream_outage_approx(i: int, cfg: SystemConfig, alpha_i: float, rate_i: float) -> float:
    """First-order outage ``x**k / k!`` of stream ``i``."""
    k = _check_index(i, cfg)
    return float(_approx_terms(k, _scalar_argument(cfg, alpha_i, rate_i)))


def stream_outages(cfg: SystemConfig, powers, rates) -> np.ndarray:
    return mrc_outage_cdf(cfg.orders, outage_arguments(cfg, powers, rates))


def stream_outages_approx(cfg: SystemConfig, powers, rates) -> np.ndarray:
    return _approx_terms(cfg.orders, outage_arguments(cfg, powers, rates))


def _combine(p):
    if np.any(p >= 1):
        return 1.0
    return float(-np.expm1(np.sum(np.log1p(-p))))


def exact_outage(cfg: SystemConfig, powers, rates) -> float:
    """System outage ``1 - prod(1 - P_i)``."""
    return _combine(stream_outages(cfg, powers, rates))


def approx_outage(cfg: SystemConfig, powers, rates) -> float:
    """First-order system outage ``sum_i x_i**k_i / k_i!``."""
    return float(np.sum(stream_outages_approx(cfg, powers, rates)))


def system_outage(cfg: SystemConfig, alloc: Allocation) -> OutageReport:
    if alloc.m != cfg.m:
        raise ValueError(f"allocation has {alloc.m} streams, configuration has {cfg.m}")
    p = stream_outages(cfg, alloc.powers, alloc.rates)
    return OutageReport(p, _combine(p), approx_outage(cfg, alloc.powers, alloc.rates))


def _log_rate_derivative(k, alpha, rate, snr):
    # ln[e^R (e^R - 1)^(k-1) / ((alpha snr)^k (k-1)!)]
    with np.errstate(divide="ignore"):
        return rate + (k - 1) * np.log(np.expm1(rate)) - k * np.log(alpha * snr) - special.gammaln(k)


def stream_outage_rate_derivative(i: int, cfg: SystemConfig, alpha_i: float, rate_i: float) -> float:
    """Slope ``dP_i/dR_i`` of the first-order stream outage.

    ``e^R (e^R - 1)^(k-1) / ((alpha snr)^k (k-1)!)`` with ``k = n - m + i``.
    """
    k = _check_index(i, cfg)
    if rate_i < 0:
        raise ValueError("rate must be nonnegative")
    if alpha_i <= 0:
        if rate_i > 0:
            raise ValueError("rate derivative undefined for an unpowered stream")
        alpha_i = 0.0
    if rate_i == 0:
        if k > 1:
            return 0.0
        return math.inf if alpha_i == 0 else 1.0 / (alpha_i * cfg.snr)
    return float(np.exp(_log_rate_derivative(k, alpha_i, rate_i, cfg.snr)))


def rate_derivatives(cfg: SystemConfig, powers, rates) -> np.ndarray:
    """Vectorized :func:`stream_outage_rate_derivative` over all streams."""
    powers, rates = _as_vectors(cfg, powers, rates)
    k = cfg.orders.astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.exp(_log_rate_derivative(k, powers, rates, cfg.snr))
        at_zero = np.where(k == 1, 1.0 / (powers * cfg.snr), 0.0)
    return np.where(rates == 0, at_zero, out)


def exact_outage_gradient(cfg: SystemConfig, powers, rates):
    """Exact system outage and its gradient in powers and rates.

    Returns ``(p_out, d_powers, d_rates)``.  Powers must be strictly positive.
    """
    powers, rates = _as_vectors(cfg, powers, rates)
    x = outage_arguments(cfg, powers, rates)
    p = mrc_outage_cdf(cfg.orders, x)
    p_out = _combine(p)
    with np.errstate(divide="ignore", invalid="ignore"):
        weight = np.where(p < 1, (1.0 - p_out) / (1.0 - p), 0.0)
    dens = erlang_pdf(cfg.orders, x) * weight
    d_powers = -dens * x / powers
    d_rates = dens * np.exp(rates) / (powers * cfg.snr)
    return p_out, d_powers, d_rates


def approx_outage_gradient(cfg: SystemConfig, powers, rates):
    """First-order system outage and its gradient, ``(p_hat, d_powers, d_rates)``."""
    powers, rates = _as_vectors(cfg, powers, rates)
    x = outage_arguments(cfg, powers, rates)
    k = cfg.orders.astype(float)
    terms = _approx_terms(k, x)
    d_powers = -k * terms / powers
    d_rates = rate_derivatives(cfg, powers, rates)
    return float(terms.sum()), d_powers, d_rates


def diversity_fit(curve, window: tuple[float, float]) -> DiversityReport:
    """Least-squares slope of ``-ln P_out`` against ``ln gamma0``.

    Parameters
    ----------
    curve : iterable of (gamma0, p_out)
        SNR in linear units.
    window : (lo_db, hi_db)
        Only points with ``lo_db <= 10 log10(gamma0) <= hi_db`` are used.
    """
    pts = np.asarray(list(curve), dtype=float).reshape(-1, 2)
    lo, hi = window
    snr_db = 10.0 * np.log10(pts[:, 0])
    sel = (snr_db >= lo - 1e-9) & (snr_db <= hi + 1e-9)
    pts = pts[sel]
    if pts.shape[0] < 3:
        raise ValueError(f"need at least 3 points inside {window} dB, got {pts.shape[0]}")
    if np.any(pts[:, 1] <= 0):
        raise ValueError("outage probabilities must be positive for a log-log fit")
    xs = np.log(pts[:, 0])
    ys = -np.log(pts[:, 1])
    slope, icpt = np.polyfit(xs, ys, 1)
    resid = float(np.max(np.abs(ys - (slope * xs + icpt))))
    return DiversityReport(float(slope), (float(lo), float(hi)), resid)
