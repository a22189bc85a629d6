"""Dual problems: least power or most rate under an outage target.

Minimizing the power sum subject to ``P_out <= eps`` has the same solution
as the primal APA at the budget where the optimized outage equals ``eps``;
since scaling every power by ``s`` is the same as scaling the SNR by ``s``,
the optimum at budget ``S`` is ``(S/m)`` times the primal optimum at
``snr * S/m``.  The budget is found by root finding on ``ln S``.

The rate dual cannot be rescaled this way; it is solved by root finding on
the total rate, each step solving the ARA primal.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .apa import apa_exact
from .ara import ara_exact
from .channel import SystemConfig
from .errors import DegenerateWarning, InfeasibleError
from .outage import Allocation, RateSpec, exact_outage

__all__ = ["DualConstraint", "min_total_power", "max_total_rate"]

_LOG_SPAN = math.log(1e12)


@dataclass(frozen=True)
class DualConstraint:
    """Outage target ``0 < epsilon < 1``."""

    epsilon: float

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")


def _apa_at_budget(cfg, rate, budget):
    scaled = cfg.with_snr(cfg.snr * budget / cfg.m)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        alloc, _ = apa_exact(scaled, rate)
    return Allocation(alloc.powers * (budget / cfg.m), alloc.rates)


def _bracket(g, x0, step, lo_lim, hi_lim):
    """Find ``lo < hi`` with ``g(lo) < 0 < g(hi)`` for increasing ``g``."""
    lo = hi = x0
    while g(lo) >= 0:
        lo -= step
        if lo < lo_lim:
            return None, hi
        step *= 2
    while g(hi) <= 0:
        hi += step
        if hi > hi_lim:
            return lo, None
        step *= 2
    return lo, hi


def min_total_power(cfg: SystemConfig, rate: float, constraint: DualConstraint, tol: float = 1e-12):
    """Smallest power sum whose optimized outage meets ``constraint``.

    Returns
    -------
    (Allocation, float)
        The optimal allocation (sums to the returned total) and the total.

    Raises
    ------
    InfeasibleError
        When even ``1e12 m`` total power cannot reach ``epsilon``.
    """
    if not rate > 0:
        raise ValueError(f"per-stream rate must be positive, got {rate}")
    log_eps = math.log(constraint.epsilon)
    log_m = math.log(cfg.m)

    def excess(log_s):
        # optimized outage falls with budget; flip sign so it increases
        alloc = _apa_at_budget(cfg, rate, math.exp(log_s))
        p = exact_outage(cfg, alloc.powers, alloc.rates)
        return log_eps - (math.log(p) if p > 0 else -math.inf)

    lo, hi = _bracket(excess, log_m, 1.0, log_m - _LOG_SPAN, log_m + _LOG_SPAN)
    if hi is None:
        alloc = _apa_at_budget(cfg, rate, cfg.m * 1e12)
        raise InfeasibleError(
            f"outage {constraint.epsilon} not reachable with total power up to {cfg.m * 1e12:.3g}",
            infimum=exact_outage(cfg, alloc.powers, alloc.rates))
    if lo is None:
        budget = cfg.m * math.exp(-_LOG_SPAN)
        warnings.warn(f"outage target {constraint.epsilon} met by a vanishing budget ({budget:.3g})",
                      DegenerateWarning, stacklevel=2)
        return _apa_at_budget(cfg, rate, budget), budget
    log_s = optimize.brentq(excess, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps)
    budget = math.exp(log_s)
    return _apa_at_budget(cfg, rate, budget), budget


def _ara_total(cfg, total, objective):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        alloc, _ = ara_exact(cfg, RateSpec.fixed(total / cfg.m), objective=objective)
    return alloc


def max_total_rate(cfg: SystemConfig, constraint: DualConstraint, tol: float = 1e-12,
                   objective: str = "exact"):
    """Largest total rate whose rate-optimized outage meets ``constraint``.

    Returns
    -------
    (Allocation, float)
        The optimal rate split and its total ``mR``.
    """
    log_eps = math.log(constraint.epsilon)

    def excess(log_t):
        alloc = _ara_total(cfg, math.exp(log_t), objective)
        p = exact_outage(cfg, alloc.powers, alloc.rates)
        return (math.log(p) if p > 0 else -math.inf) - log_eps

    start = math.log(cfg.m * math.log1p(cfg.snr))
    lo, hi = _bracket(excess, start, 1.0, start - _LOG_SPAN, start + math.log(1e3))
    if lo is None:
        total = math.exp(start - _LOG_SPAN)
        warnings.warn(f"outage target {constraint.epsilon} needs a vanishing rate ({total:.3g})",
                      DegenerateWarning, stacklevel=2)
        return _ara_total(cfg, total, objective), total
    if hi is None:
        raise InfeasibleError(f"outage stays below {constraint.epsilon} at every tested rate")
    log_t = optimize.brentq(excess, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps)
    total = math.exp(log_t)
    return _ara_total(cfg, total, objective), total
