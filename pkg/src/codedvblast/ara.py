"""Average rate allocation (ARA) at uniform power.

Splits the total rate ``mR`` across streams to minimize system outage.
Higher-order streams (larger diversity) get more rate; weak low-order
streams may be switched off entirely, and the inactive streams are always
a prefix ``1..m-m_A``.  With ``m_A`` active streams of orders
``k = n-m_A+1..n`` the closed form is

    R_i = ln snr + (mR - m_A ln snr) / (b k_i) + c_i,
    a = sum ln((k-1)!)/k,  b = sum 1/k,  c_i = (ln((k_i-1)!) - a/b) / k_i.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from ._simplex import project_simplex, projected_gradient
from .apa import SolverDiagnostics
from .channel import SystemConfig
from .errors import AllocationError, FormulaWarning, SolverError, ValidityWarning
from .outage import (
    Allocation,
    DiversityReport,
    OutageReport,
    RateSpec,
    exact_outage,
    exact_outage_gradient,
    rate_derivatives,
)

__all__ = [
    "AraCoefficients",
    "ara_coefficients",
    "ara_candidate_rates",
    "ara_closed_form",
    "ara_active_set_by_positivity",
    "water_fill_rates",
    "refine_rates_exact",
    "ara_exact",
    "ara_predicted_outage",
    "ara_printed_outage",
    "ara_diversity",
]


@dataclass(frozen=True)
class AraCoefficients:
    a: float
    b: float
    c: np.ndarray
    active_count: int


def ara_coefficients(n: int, m: int, active_count: int) -> AraCoefficients:
    if not 1 <= active_count <= m:
        raise ValueError(f"active count must be in 1..{m}")
    k_act = np.arange(n - active_count + 1, n + 1, dtype=float)
    a = float(np.sum(special.gammaln(k_act) / k_act))
    b = float(np.sum(1.0 / k_act))
    k = np.arange(n - m + 1, n + 1, dtype=float)
    c = (special.gammaln(k) - a / b) / k
    return AraCoefficients(a, b, c, active_count)


def ara_candidate_rates(cfg: SystemConfig, total_rate: float, active_count: int):
    """Unclamped closed-form rates with the last ``active_count`` streams active.

    Returns ``(rates, coefficients)``; inactive entries are 0 and active
    entries may be negative when the candidate is infeasible.
    """
    coef = ara_coefficients(cfg.n, cfg.m, active_count)
    k = cfg.orders.astype(float)
    log_snr = math.log(cfg.snr)
    rates = log_snr + (total_rate - active_count * log_snr) / (coef.b * k) + coef.c
    rates[: cfg.m - active_count] = 0.0
    return rates, coef


def _check_regime(cfg, spec):
    rate = spec.rate(cfg)
    if not 1 < rate < math.log1p(cfg.snr):
        warnings.warn(
            f"R={rate:.4g} nats outside the moderate-rate regime 1 < R < ln(1+snr)={math.log1p(cfg.snr):.4g}",
            ValidityWarning, stacklevel=3)


def _select_candidate(cfg, total_rate, boost):
    """Best feasible closed-form candidate over active counts.

    With ``boost`` the active streams share the whole power budget
    (``m/k`` each) and the rates use the boosted SNR.
    """
    best = None
    for k in range(1, cfg.m + 1):
        scale = cfg.m / k if boost else 1.0
        rates, coef = ara_candidate_rates(cfg.with_snr(cfg.snr * scale), total_rate, k)
        if np.any(rates < 0):
            continue
        powers = np.zeros(cfg.m) if boost else np.ones(cfg.m)
        powers[cfg.m - k:] = scale
        p = exact_outage(cfg, powers, rates)
        if best is None or p < best[0]:
            best = (p, Allocation(powers, rates), coef)
    if best is None:
        raise AllocationError("no feasible active set for the closed-form rates")
    return best[1], best[2]


def ara_closed_form(cfg: SystemConfig, spec: RateSpec):
    """Closed-form rates, choosing the active count of lowest exact outage.

    Candidates whose formula gives a negative rate are discarded rather than
    clamped, so the returned rates always sum to ``mR``.

    Returns
    -------
    (Allocation, AraCoefficients)
    """
    _check_regime(cfg, spec)
    return _select_candidate(cfg, spec.total_rate(cfg), boost=False)


def ara_active_set_by_positivity(cfg: SystemConfig, spec: RateSpec) -> int:
    """Largest active count whose smallest closed-form rate is still positive."""
    total = spec.total_rate(cfg)
    for k in range(cfg.m, 0, -1):
        rates, _ = ara_candidate_rates(cfg, total, k)
        if rates[cfg.m - k] > 0:
            return k
    return 1


def _solve_stream_rate(k, log_alpha_snr, log_nu):
    # R + (k-1) ln(e^R - 1) = ln nu + k ln(alpha snr) + ln (k-1)!
    target = log_nu + k * log_alpha_snr + special.gammaln(k)
    if k == 1:
        return max(0.0, target)

    def h(r):
        return r + (k - 1) * math.log(math.expm1(r)) - target

    hi = max(1.0, target / k + 1.0)
    while h(hi) < 0:
        hi *= 2.0
    lo = min(0.5, hi / 2)
    while h(lo) > 0:
        lo *= 0.5
        if lo < 1e-300:
            return 0.0
    return optimize.brentq(h, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)


def water_fill_rates(cfg: SystemConfig, total_rate: float, powers, tol: float = 1e-10):
    """Minimize the first-order outage over rates at fixed powers.

    Solves ``dP_i/dR_i = nu`` on every stream that carries rate and clamps
    ``R_i = 0`` where the slope at zero already exceeds ``nu``; ``nu`` is
    set by the total-rate constraint.  Streams with zero power get no rate.

    Returns
    -------
    (rates, nu, iterations)
    """
    powers = np.asarray(powers, dtype=float)
    k = cfg.orders.astype(float)
    on = powers > 0
    if not np.any(on):
        raise ValueError("at least one stream needs power")
    log_as = np.where(on, np.log(np.where(on, powers, 1.0) * cfg.snr), 0.0)

    def rates_for(log_nu):
        r = np.zeros(cfg.m)
        for i in np.flatnonzero(on):
            r[i] = _solve_stream_rate(k[i], log_as[i], log_nu)
        return r

    def excess(log_nu):
        return rates_for(log_nu).sum() - total_rate

    k_on = k[on]
    b = np.sum(1.0 / k_on)
    seed = (total_rate - np.sum(special.gammaln(k_on) / k_on)) / b - np.sum(log_as[on]) / b
    lo, hi = seed - 1.0, seed + 1.0
    width = 1.0
    while excess(lo) > 0:
        width *= 2
        lo = seed - width
    width = 1.0
    while excess(hi) < 0:
        width *= 2
        hi = seed + width
    log_nu, info = optimize.brentq(excess, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                                   full_output=True)
    rates = rates_for(log_nu)
    drift = total_rate - rates.sum()
    if abs(drift) > tol * max(1.0, total_rate):
        raise SolverError(f"rate budget residual {drift:.3g} above tolerance")
    # absorb rounding so the budget holds exactly
    rates[np.argmax(rates)] += drift
    return rates, math.exp(log_nu), info.iterations


def _kkt_residual(cfg, powers, rates, nu, total_rate):
    slopes = rate_derivatives(cfg, powers, rates)
    act = rates > 0
    res = [abs(rates.sum() - total_rate) / max(1.0, total_rate)]
    if np.any(act):
        res.append(float(np.max(np.abs(slopes[act] - nu) / nu)))
    idle = (~act) & (powers > 0)
    if np.any(idle):
        res.append(float(np.max(np.maximum(0.0, nu - slopes[idle]) / nu)))
    return max(res)


def refine_rates_exact(cfg: SystemConfig, powers, rates, total_rate, tol=1e-9, max_iter=10_000):
    """Projected gradient on the exact ``ln P_out`` over the rate simplex."""
    powers = np.asarray(powers, dtype=float)
    on = powers > 0
    idx = np.flatnonzero(on)

    def expand(sub):
        full = np.zeros(cfg.m)
        full[idx] = sub
        return full

    safe_powers = np.where(on, powers, 1.0)

    def fun_grad(sub):
        p, _, dr = exact_outage_gradient(cfg, safe_powers, expand(sub))
        if p <= 0:
            return -np.inf, np.zeros_like(sub)
        return math.log(p), dr[idx] / p

    res = projected_gradient(fun_grad, rates[idx], lambda v: project_simplex(v, total_rate),
                             tol=tol, max_iter=max_iter)
    out = expand(res.x)
    _, _, dr = exact_outage_gradient(cfg, safe_powers, out)
    act = out > 0
    nu = float(np.mean(dr[act])) if np.any(act) else math.nan
    return out, nu, res


def ara_exact(cfg: SystemConfig, spec: RateSpec, tol: float = 1e-10, objective: str = "approx"):
    """Numerical ARA optimum at unit powers.

    Parameters
    ----------
    objective : {'approx', 'exact'}
        ``'approx'`` water-fills the first-order outage; ``'exact'`` then
        refines against the exact outage by projected gradient.

    Returns
    -------
    (Allocation, SolverDiagnostics)
    """
    total = spec.total_rate(cfg)
    if not total > 0:
        raise ValueError("total rate must be positive")
    powers = np.ones(cfg.m)
    rates, nu, iters = water_fill_rates(cfg, total, powers, tol)
    diag = SolverDiagnostics(multiplier_rate=nu, iterations=iters,
                             residual=_kkt_residual(cfg, powers, rates, nu, total),
                             method="approx-waterfill")
    if total < 1:
        diag.flags = ("outside-validity:total-rate<1",)
    diag.converged = diag.residual < max(tol, 1e-8)
    if objective == "approx":
        return Allocation(powers, rates), diag
    if objective != "exact":
        raise ValueError(f"unknown objective {objective!r}")
    rates, nu, res = refine_rates_exact(cfg, powers, rates, total)
    diag = SolverDiagnostics(multiplier_rate=nu, iterations=iters + res.iterations,
                             residual=res.residual, converged=res.converged,
                             method="exact-pg", flags=diag.flags)
    return Allocation(powers, rates), diag


def ara_diversity(cfg: SystemConfig, spec: RateSpec, active_count: int) -> float:
    """Diversity order ``(m_A / b)(1 - r/m_A)`` of the rate-optimized system."""
    coef = ara_coefficients(cfg.n, cfg.m, active_count)
    return active_count / coef.b * (1.0 - spec.multiplexing_gain / active_count)


def _predicted(cfg, spec, alloc, coef):
    total = spec.total_rate(cfg)
    m_a = coef.active_count
    nu = math.exp((total - coef.a) / coef.b - m_a / coef.b * math.log(cfg.snr))
    k = cfg.orders.astype(float)
    per_stream = np.where(alloc.rates > 0, nu / k, 0.0)
    exact = float(-np.expm1(np.sum(np.log1p(-np.minimum(per_stream, 1.0)))))
    report = OutageReport(per_stream, exact, float(per_stream.sum()))
    return report, nu


def ara_printed_outage(cfg: SystemConfig, spec: RateSpec, active_count: int) -> float:
    """Optimized outage ``b (n-m_A+m-1)!/(n-1)! e^((mR-a)/b) snr^(-m_A/b)``."""
    coef = ara_coefficients(cfg.n, cfg.m, active_count)
    total = spec.total_rate(cfg)
    log_p = (math.log(coef.b) + special.gammaln(cfg.n - active_count + cfg.m)
             - special.gammaln(cfg.n) + (total - coef.a) / coef.b
             - active_count / coef.b * math.log(cfg.snr))
    return math.exp(log_p)


def ara_predicted_outage(cfg: SystemConfig, spec: RateSpec):
    """Closed-form optimized outage and diversity of the ARA.

    Per-stream outages are ``nu / (n-m+i)`` on the active streams, so the
    system value is ``b nu``.  When the printed constant with
    ``(n-m_A+m-1)!/(n-1)!`` differs from that sum a :class:`FormulaWarning`
    is issued.

    Returns
    -------
    (OutageReport, DiversityReport)
    """
    alloc, coef = ara_closed_form(cfg, spec)
    report, _ = _predicted(cfg, spec, alloc, coef)
    printed = ara_printed_outage(cfg, spec, coef.active_count)
    if abs(printed - report.system_approx) > 1e-9 * report.system_approx:
        warnings.warn(
            f"printed optimized-outage constant gives {printed:.6g}, direct sum gives "
            f"{report.system_approx:.6g} (m_A={coef.active_count})", FormulaWarning, stacklevel=2)
    d = ara_diversity(cfg, spec, coef.active_count)
    return report, DiversityReport(d, None, 0.0)
