"""Joint average power and rate allocation (APRA).

In the moderate-rate regime the joint optimum spreads the power uniformly
over the active streams (``m/m_A`` each, zero elsewhere); the rates are the
ARA rates computed at the boosted SNR ``(m/m_A) snr``.  Switching a stream
off therefore buys the survivors extra SNR, which keeps weak streams silent
over a wider SNR range than under the ARA.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import optimize

from ._simplex import project_simplex, projected_gradient
from .apa import POWER_FLOOR, SolverDiagnostics
from .ara import (
    _check_regime,
    _select_candidate,
    ara_candidate_rates,
    ara_exact,
    water_fill_rates,
)
from .channel import SystemConfig
from .outage import (
    Allocation,
    RateSpec,
    exact_outage,
    exact_outage_gradient,
    rate_derivatives,
)

__all__ = [
    "apra_closed_form",
    "apra_exact",
    "apra_kkt_residual",
    "apra_refine_exact",
    "apra_threshold",
    "ara_threshold",
    "predicted_active_count",
]


def apra_closed_form(cfg: SystemConfig, spec: RateSpec) -> Allocation:
    """Uniform power on the active set, ARA rates at boosted SNR.

    Every active count ``k`` is tried; the feasible candidate with the
    lowest exact outage wins.
    """
    _check_regime(cfg, spec)
    alloc, _ = _select_candidate(cfg, spec.total_rate(cfg), boost=True)
    return alloc


def apra_kkt_residual(cfg: SystemConfig, powers, rates, nu_rate, nu_power, total_rate) -> float:
    """Largest violation of the joint stationarity and budget conditions.

    Uses ``dP_i/dalpha_i ~ -(1/alpha_i) dP_i/dR_i`` for the power slopes.
    """
    powers = np.asarray(powers, dtype=float)
    rates = np.asarray(rates, dtype=float)
    act = rates > 0
    slopes = rate_derivatives(cfg, np.where(powers > 0, powers, 1.0), rates)
    res = [abs(rates.sum() - total_rate) / max(1.0, total_rate),
           abs(powers.sum() - cfg.m) / cfg.m]
    if np.any(act):
        res.append(float(np.max(np.abs(slopes[act] - nu_rate) / nu_rate)))
        res.append(float(np.max(np.abs(slopes[act] / powers[act] - nu_power) / nu_power)))
    return max(res)


def _rebalance_powers(cfg, rates, powers, budget):
    # at fixed rates: dP_i/dR_i / alpha_i = nu_alpha with dP_i/dR_i ~ alpha_i^-k
    act = rates > 0
    k = cfg.orders.astype(float)[act]
    log_c = np.log(rate_derivatives(cfg, np.ones(cfg.m), rates)[act])

    def excess(log_nu):
        return np.exp((log_c - log_nu) / (k + 1)).sum() - budget

    seed = float(np.mean(log_c))
    lo, hi = seed - 1.0, seed + 1.0
    while excess(lo) < 0:
        lo -= 2 * (hi - lo)
    while excess(hi) > 0:
        hi += 2 * (hi - lo)
    log_nu = optimize.brentq(excess, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    out = np.zeros(cfg.m)
    out[act] = np.exp((log_c - log_nu) / (k + 1))
    out[act] *= budget / out[act].sum()
    return out, math.exp(log_nu)


def _alternate(cfg, total_rate, active_count, tol, max_rounds):
    m = cfg.m
    k = cfg.orders.astype(float)
    # start away from the uniform point: lower-order streams get more power
    powers = np.zeros(m)
    powers[m - active_count:] = 1.0 / k[m - active_count:]
    powers *= m / powers.sum()
    nu_r = nu_a = math.nan
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        rates, new_r, _ = water_fill_rates(cfg, total_rate, powers)
        powers, new_a = _rebalance_powers(cfg, rates, powers, m)
        done = (rounds > 1 and abs(new_r - nu_r) <= tol * new_r and abs(new_a - nu_a) <= tol * new_a)
        nu_r, nu_a = new_r, new_a
        if done:
            break
    # final rate pass so the rates match the returned powers
    rates, nu_r, _ = water_fill_rates(cfg, total_rate, powers)
    resid = apra_kkt_residual(cfg, powers, rates, nu_r, nu_a, total_rate)
    return powers, rates, nu_r, nu_a, rounds, resid


def apra_refine_exact(cfg: SystemConfig, alloc: Allocation, total_rate: float,
                      tol: float = 1e-9, max_iter: int = 10_000):
    """Joint projected gradient on the exact ``ln P_out`` over both simplices.

    Only streams active in ``alloc`` are optimized; the others keep zero
    power and rate.
    """
    idx = np.flatnonzero(alloc.rates > 0)
    q = idx.size

    def expand(z):
        powers = np.zeros(cfg.m)
        rates = np.zeros(cfg.m)
        powers[idx] = z[:q]
        rates[idx] = z[q:]
        return powers, rates

    def fun_grad(z):
        powers, rates = expand(z)
        safe = np.where(powers > 0, powers, 1.0)
        p, dp, dr = exact_outage_gradient(cfg, safe, rates)
        if p <= 0:
            return -np.inf, np.zeros_like(z)
        return math.log(p), np.concatenate((dp[idx], dr[idx])) / p

    def project(z):
        return np.concatenate((project_simplex(z[:q], cfg.m, POWER_FLOOR),
                               project_simplex(z[q:], total_rate)))

    z0 = np.concatenate((alloc.powers[idx], alloc.rates[idx]))
    res = projected_gradient(fun_grad, z0, project, tol=tol, max_iter=max_iter)
    powers, rates = expand(res.x)
    return Allocation(powers, rates), res


def apra_exact(cfg: SystemConfig, spec: RateSpec, tol: float = 1e-10, max_rounds: int = 100,
               objective: str = "approx"):
    """Numerical joint optimum.

    For every active count the first-order problem is solved by alternating
    a rate water-filling at fixed powers with a power rebalancing at fixed
    rates, until both multipliers settle to ``tol`` relative.  The candidate
    of lowest exact outage is returned.  ``objective='exact'`` additionally
    refines the winner (and the ARA optimum, which is also feasible) by a
    joint projected gradient on the exact outage.

    Returns
    -------
    (Allocation, SolverDiagnostics)
    """
    total = spec.total_rate(cfg)
    if not total > 0:
        raise ValueError("total rate must be positive")
    best = None
    for count in range(1, cfg.m + 1):
        powers, rates, nu_r, nu_a, rounds, resid = _alternate(cfg, total, count, tol, max_rounds)
        p = exact_outage(cfg, powers, rates)
        if best is None or p < best[0]:
            best = (p, powers, rates, nu_r, nu_a, rounds, resid)
    p, powers, rates, nu_r, nu_a, rounds, resid = best
    flags = []
    act = rates > 0
    if np.any(rates[act] <= math.log(2)):
        flags.append("outside-convexity:rate<=ln2")
    diag = SolverDiagnostics(multiplier_power=nu_a, multiplier_rate=nu_r, iterations=rounds,
                             residual=resid, converged=resid < max(tol, 1e-8),
                             method="approx-alternating", flags=tuple(flags))
    alloc = Allocation(powers, rates)
    if objective == "approx":
        return alloc, diag
    if objective != "exact":
        raise ValueError(f"unknown objective {objective!r}")

    ara_alloc, _ = ara_exact(cfg, spec)
    runs = [apra_refine_exact(cfg, start, total) for start in (alloc, ara_alloc)]
    refined, res = min(runs, key=lambda r: r[1].fun)
    p, dp, dr = exact_outage_gradient(cfg, np.where(refined.powers > 0, refined.powers, 1.0),
                                      refined.rates)
    act = refined.rates > 0
    diag = SolverDiagnostics(multiplier_power=float(-np.mean(dp[act])),
                             multiplier_rate=float(np.mean(dr[act])),
                             iterations=rounds + res.iterations, residual=res.residual,
                             converged=res.converged, method="exact-pg", flags=tuple(flags))
    return refined, diag


def _predicted_outages(cfg, total_rate, boost):
    """Moderate-rate optimized outage ``b e^((mR-a)/b) snr'^(-k/b)`` per active count.

    Infeasible counts (a negative closed-form rate) map to ``inf``.
    """
    out = np.full(cfg.m, np.inf)
    for count in range(1, cfg.m + 1):
        snr = cfg.snr * (cfg.m / count if boost else 1.0)
        rates, coef = ara_candidate_rates(cfg.with_snr(snr), total_rate, count)
        if np.any(rates < 0):
            continue
        out[count - 1] = math.exp(math.log(coef.b) + (total_rate - coef.a) / coef.b
                                  - count / coef.b * math.log(snr))
    return out


def predicted_active_count(cfg: SystemConfig, spec: RateSpec, boost: bool = True) -> int:
    """Active count minimizing the closed-form optimized outage."""
    return int(np.argmin(_predicted_outages(cfg, spec.total_rate(cfg), boost))) + 1


def _threshold(cfg, spec, boost, method):
    const = math.log(12.0) if boost else math.log(3.0)
    if method == "auto":
        method = "closed_form" if cfg.n == cfg.m == 2 else "numeric"
    gap_db = 10.0 * math.log10(cfg.gap)
    if method == "closed_form":
        if not cfg.n == cfg.m == 2:
            raise ValueError("closed-form threshold is only available for 2x2")
        log_snr = math.log(cfg.snr)
        r_th = 0.5 + 3.0 * const / (4.0 * log_snr) if log_snr > 0 else math.inf
        r = spec.multiplexing_gain
        if r <= 0.5:
            snr_db = math.inf
        else:
            snr_db = 10.0 * (3.0 * const / (2.0 * (2.0 * r - 1.0))) / math.log(10.0) + gap_db
        return r_th, snr_db
    if method != "numeric":
        raise ValueError(f"unknown method {method!r}")

    def all_active(c, s):
        return predicted_active_count(c, s, boost) == c.m

    if all_active(cfg, RateSpec.multiplexing(cfg.m)):
        lo, hi = 0.0, float(cfg.m)
        if all_active(cfg, RateSpec.multiplexing(0.0)):
            r_th = 0.0
        else:
            r_th = optimize.brentq(
                lambda r: 0.5 - all_active(cfg, RateSpec.multiplexing(r)), lo, hi, xtol=1e-10)
    else:
        r_th = math.inf

    def flip(snr_db):
        c = SystemConfig.from_db(cfg.n, cfg.m, snr_db, gap_db)
        return 0.5 - all_active(c, spec)

    lo_db, hi_db = -30.0, 200.0
    if flip(hi_db) > 0:
        snr_th = math.inf
    elif flip(lo_db) < 0:
        snr_th = -math.inf
    else:
        snr_th = optimize.brentq(flip, lo_db, hi_db, xtol=1e-9)
    return r_th, snr_th


def apra_threshold(cfg: SystemConfig, spec: RateSpec, method: str = "auto"):
    """Multiplexing gain and SNR (dB) above which all streams are active under APRA.

    Returns ``(r_threshold, snr_threshold_db)``: the gain threshold at the
    SNR of ``cfg`` and the SNR threshold at the multiplexing gain of ``spec``.
    ``method='closed_form'`` (2x2 only) or ``'numeric'`` (scan over the
    closed-form candidates with boosted SNR); ``'auto'`` picks the former
    when it applies.
    """
    return _threshold(cfg, spec, True, method)


def ara_threshold(cfg: SystemConfig, spec: RateSpec, method: str = "auto"):
    """As :func:`apra_threshold`, for the ARA (no power boost)."""
    return _threshold(cfg, spec, False, method)
