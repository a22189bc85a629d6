"""Average power allocation (APA) at a uniform per-stream rate.

Minimizes system outage over the powers with ``sum(alpha) = m``.  The first
stream has the lowest diversity order and dominates the outage, so almost
all power goes to it; stream ``i >= 2`` gets

    alpha_i = b_i * ((e^R - 1) / snr) ** ((i - 1) / (n - m + i + 1)),
    b_i = [m^(n-m+2) (n-m)! / (n-m+i-1)!] ** (1 / (n - m + i + 1)),

and stream 1 takes the rest.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from ._simplex import project_simplex, projected_gradient
from .channel import SystemConfig
from .errors import AllocationError, SolverError, ValidityWarning
from .outage import (
    Allocation,
    OutageReport,
    exact_outage,
    exact_outage_gradient,
)

__all__ = [
    "ApaCoefficients",
    "SolverDiagnostics",
    "GainReport",
    "POWER_FLOOR",
    "apa_coefficients",
    "apa_closed_form",
    "apa_approx_kkt",
    "apa_exact",
    "apa_predicted_outage",
    "snr_gain",
]

POWER_FLOOR = 1e-12


@dataclass(frozen=True)
class ApaCoefficients:
    """Coefficients ``b_2..b_m``; ``b[0]`` belongs to stream 2."""

    b: np.ndarray


@dataclass
class SolverDiagnostics:
    multiplier_power: float = math.nan
    multiplier_rate: float = math.nan
    iterations: int = 0
    residual: float = 0.0
    converged: bool = True
    method: str = ""
    flags: tuple = field(default_factory=tuple)


@dataclass(frozen=True)
class GainReport:
    gain_linear: float

    @property
    def gain_db(self) -> float:
        return 10.0 * math.log10(self.gain_linear)


def apa_coefficients(n: int, m: int) -> ApaCoefficients:
    i = np.arange(2, m + 1)
    k = n - m + i
    log_b = ((n - m + 2) * math.log(m) + special.gammaln(n - m + 1) - special.gammaln(k)) / (k + 1)
    return ApaCoefficients(np.exp(log_b))


def _check_rate(cfg, rate):
    if not rate > 0:
        raise ValueError(f"per-stream rate must be positive, got {rate}")
    if rate >= math.log1p(cfg.snr):
        warnings.warn(
            f"R={rate:.4g} nats is outside the low-outage regime R < ln(1+snr)={math.log1p(cfg.snr):.4g}",
            ValidityWarning, stacklevel=3)


def apa_closed_form(cfg: SystemConfig, rate: float):
    """Closed-form optimum powers for per-stream rate ``rate`` (nats).

    Returns
    -------
    (Allocation, ApaCoefficients)

    Raises
    ------
    AllocationError
        If the powers of streams 2..m exhaust the budget, which only happens
        far outside the low-outage regime.
    """
    _check_rate(cfg, rate)
    coef = apa_coefficients(cfg.n, cfg.m)
    y = math.expm1(rate) / cfg.snr
    i = np.arange(2, cfg.m + 1)
    tail = coef.b * y ** ((i - 1) / (cfg.n - cfg.m + i + 1))
    first = cfg.m - tail.sum()
    if first <= 0:
        raise AllocationError(
            f"closed-form APA gives alpha_1={first:.4g} <= 0 (R={rate}, snr={cfg.snr:.4g})")
    powers = np.concatenate(([first], tail))
    return Allocation(powers, np.full(cfg.m, float(rate))), coef


def _kkt_powers(log_lam, k, log_y):
    # inverse of d/dalpha of the first-order outage = -lambda
    return np.exp((k * log_y - log_lam - special.gammaln(k)) / (k + 1))


def apa_approx_kkt(cfg: SystemConfig, rate: float, rtol: float = 1e-12):
    """Minimize the first-order outage over powers via its KKT conditions.

    Every power is an explicit function of the multiplier ``lambda``; the
    multiplier is found by bracketed root finding on the power budget.
    """
    if not rate > 0:
        raise ValueError(f"per-stream rate must be positive, got {rate}")
    m = cfg.m
    rates = np.full(m, float(rate))
    k = cfg.orders.astype(float)
    log_y = math.log(math.expm1(rate) / cfg.snr)
    if m == 1:
        lam = math.exp(k[0] * log_y - special.gammaln(k[0]))
        return Allocation([1.0], rates), SolverDiagnostics(multiplier_power=lam, method="approx-kkt")

    def excess(log_lam):
        return _kkt_powers(log_lam, k, log_y).sum() - m

    seed = k[0] * log_y - (k[0] + 1) * math.log(m) - special.gammaln(k[0])
    lo, hi = seed - 1.0, seed + 1.0
    width = 1.0
    while excess(lo) < 0:
        width *= 2
        lo = seed - width
    width = 1.0
    while excess(hi) > 0:
        width *= 2
        hi = seed + width
    log_lam, info = optimize.brentq(excess, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                                    full_output=True)
    powers = _kkt_powers(log_lam, k, log_y)
    residual = abs(powers.sum() - m) / m
    diag = SolverDiagnostics(multiplier_power=math.exp(log_lam), iterations=info.iterations,
                             residual=residual, converged=residual < rtol, method="approx-kkt")
    if not diag.converged:
        raise SolverError(f"power budget residual {residual:.3g} above {rtol}", diag)
    return Allocation(powers, rates), diag


def apa_exact(cfg: SystemConfig, rate: float, tol: float = 1e-9, max_iter: int = 10_000):
    """Minimize the exact system outage over the power simplex.

    Projected gradient on ``ln P_out`` (same minimizer, better scaling),
    started from :func:`apa_approx_kkt`.  Powers are floored at
    :data:`POWER_FLOOR`.  On non-convergence the last iterate is returned
    with ``diagnostics.converged = False``.
    """
    m = cfg.m
    if m == 1:
        if not rate > 0:
            raise ValueError(f"per-stream rate must be positive, got {rate}")
        alloc = Allocation([1.0], [rate])
        _, dp, _ = exact_outage_gradient(cfg, alloc.powers, alloc.rates)
        return alloc, SolverDiagnostics(multiplier_power=float(-dp[0]), method="exact-pg")

    start, _ = apa_approx_kkt(cfg, rate)
    rates = start.rates

    def fun_grad(alpha):
        p, dp, _ = exact_outage_gradient(cfg, alpha, rates)
        if p <= 0:
            return -np.inf, np.zeros_like(alpha)
        return math.log(p), dp / p

    res = projected_gradient(fun_grad, start.powers,
                             lambda v: project_simplex(v, m, POWER_FLOOR),
                             tol=tol, max_iter=max_iter)
    p, dp, _ = exact_outage_gradient(cfg, res.x, rates)
    free = res.x > 10 * POWER_FLOOR
    diag = SolverDiagnostics(multiplier_power=float(-np.mean(dp[free])), iterations=res.iterations,
                             residual=res.residual, converged=res.converged, method="exact-pg")
    return Allocation(res.x, rates), diag


def apa_predicted_outage(cfg: SystemConfig, rate: float):
    """Closed-form outage of the optimized system and per-stream diversity.

    Returns
    -------
    report : OutageReport
    diversity : ndarray
        ``d_i = (n-m+i)(n-m+2)/(n-m+i+1)``.
    """
    alloc, _ = apa_closed_form(cfg, rate)
    k = cfg.orders.astype(float)
    y = math.expm1(rate) / cfg.snr
    powers = alloc.powers.copy()
    powers[0] = cfg.m
    per_stream = np.exp(k * np.log(y / powers) - special.gammaln(k + 1))
    exact = float(-np.expm1(np.sum(np.log1p(-np.minimum(per_stream, 1.0)))))
    diversity = k * (cfg.n - cfg.m + 2) / (k + 1)
    return OutageReport(per_stream, exact, float(per_stream.sum())), diversity


def snr_gain(cfg: SystemConfig, rate: float, alloc: Allocation) -> GainReport:
    """SNR gain ``G`` with ``P_out(G, ..., G) = P_out(alloc)`` at rate ``rate``."""
    target = exact_outage(cfg, alloc.powers, alloc.rates)
    if not 0 < target < 1:
        raise ValueError(f"allocation outage {target} must lie in (0, 1)")
    rates = np.full(cfg.m, float(rate))
    log_target = math.log(target)

    def gap(log_g):
        p = exact_outage(cfg, np.full(cfg.m, math.exp(log_g)), rates)
        return (math.log(p) if p > 0 else -np.inf) - log_target

    lo, hi = -1.0, 1.0
    for _ in range(200):
        if gap(lo) > 0:
            break
        lo -= 1.0
    for _ in range(200):
        if gap(hi) < 0:
            break
        hi += 1.0
    if not (gap(lo) > 0 > gap(hi)):
        raise SolverError("could not bracket the SNR gain")
    log_g = optimize.brentq(gap, lo, hi, xtol=1e-14)
    return GainReport(math.exp(log_g))
