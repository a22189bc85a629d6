"""Local sensitivity of the optimized outage.

The sensitivity of the optimum to a parameter ``u`` is the elasticity

    delta = | (dP_out / P_out) / (du / u) |,

evaluated with the other parameters held fixed.  At a constrained optimum
every active partial derivative equals the Lagrange multiplier, so
``delta = nu * u / P_out``.  This module offers three estimators: the
closed-form moderate-rate expressions, the multiplier identity and a
central finite difference on the exact (or first-order) objective.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special

from .apa import apa_approx_kkt, apa_coefficients, apa_exact
from .apra import apra_exact
from .ara import ara_closed_form, ara_coefficients, ara_exact
from .apra import apra_closed_form
from .channel import SystemConfig
from .outage import RateSpec, approx_outage, exact_outage

__all__ = [
    "SensitivityReport",
    "STRATEGIES",
    "optimum",
    "sensitivity_closed_form",
    "sensitivity_finite_difference",
]

STRATEGIES = ("APA", "ARA", "APRA")


@dataclass(frozen=True)
class SensitivityReport:
    """One sensitivity value.

    ``parameter`` is ``'power_i'`` or ``'rate_i'`` (1-based stream index).
    ``objective`` names the outage function the optimum was computed on
    (``'approx'`` or ``'exact'``); closed-form reports leave it empty.
    """

    parameter: str
    delta: float
    method: str
    objective: str = ""
    one_sided: bool = False
    constrained: bool = False

    def __post_init__(self):
        if not self.delta >= 0:
            raise ValueError(f"sensitivity must be nonnegative, got {self.delta}")
        if self.method not in ("closed_form", "multiplier", "finite_difference"):
            raise ValueError(f"unknown method {self.method!r}")


def _strategy(name):
    key = str(name).upper()
    if key not in STRATEGIES:
        raise ValueError(f"strategy must be one of {STRATEGIES}, got {name!r}")
    return key


def _parse_parameter(parameter, m):
    kind, _, idx = str(parameter).partition("_")
    if kind not in ("power", "rate") or not idx.isdigit():
        raise ValueError(f"parameter must look like 'power_1' or 'rate_2', got {parameter!r}")
    i = int(idx)
    if not 1 <= i <= m:
        raise IndexError(f"stream index {i} outside 1..{m}")
    return kind, i - 1


def optimum(cfg: SystemConfig, spec: RateSpec, strategy: str, objective: str = "approx"):
    """Optimum of ``strategy`` on the chosen objective.

    Returns ``(Allocation, SolverDiagnostics)``.  For the APA the first-order
    optimum comes from its KKT system and the exact one from the projected
    gradient solver.
    """
    strategy = _strategy(strategy)
    if objective not in ("approx", "exact"):
        raise ValueError(f"unknown objective {objective!r}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if strategy == "APA":
            rate = spec.rate(cfg)
            return apa_approx_kkt(cfg, rate) if objective == "approx" else apa_exact(cfg, rate)
        if strategy == "ARA":
            return ara_exact(cfg, spec, objective=objective)
        return apra_exact(cfg, spec, objective=objective)


def _factorial_ratio(n, m, m_a):
    # (n-1)! / (n - m_A + m - 1)!
    return math.exp(special.gammaln(n) - special.gammaln(n - m_a + m))


def sensitivity_closed_form(cfg: SystemConfig, spec: RateSpec, strategy: str):
    """Closed-form sensitivities of the optimum.

    APA: ``delta_1 = n-m+1`` and, for ``i >= 2``,
    ``delta_i = b_i (n-m+1)/m * y^((i-1)/(n-m+i+1))`` with
    ``y = (e^R - 1)/snr``.

    ARA: ``delta_{R_i} = (n-1)! / (b (n-m_A+m-1)!) * R_i`` on the active
    streams, at the closed-form rates.

    APRA: the ARA rate expression at the boosted-SNR rates, plus the power
    sensitivity ``(n-1)! / (b (n-m_A+m-1)!)`` shared by every active stream.

    Inactive streams are omitted.
    """
    strategy = _strategy(strategy)
    n, m = cfg.n, cfg.m
    out = []
    if strategy == "APA":
        y = math.expm1(spec.rate(cfg)) / cfg.snr
        out.append(SensitivityReport("power_1", float(n - m + 1), "closed_form"))
        coef = apa_coefficients(n, m)
        for i in range(2, m + 1):
            d = coef.b[i - 2] * (n - m + 1) / m * y ** ((i - 1) / (n - m + i + 1))
            out.append(SensitivityReport(f"power_{i}", float(d), "closed_form"))
        return out

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if strategy == "ARA":
            alloc, coef = ara_closed_form(cfg, spec)
        else:
            alloc = apra_closed_form(cfg, spec)
            coef = ara_coefficients(n, m, alloc.active_count)
    scale = _factorial_ratio(n, m, coef.active_count) / coef.b
    for i in np.flatnonzero(alloc.rates > 0):
        out.append(SensitivityReport(f"rate_{i + 1}", float(scale * alloc.rates[i]), "closed_form"))
    if strategy == "APRA":
        for i in np.flatnonzero(alloc.powers > 0):
            out.append(SensitivityReport(f"power_{i + 1}", float(scale), "closed_form"))
    return out


def _perturbed(powers, rates, kind, idx, factor, constrained):
    powers = powers.copy()
    rates = rates.copy()
    vec = powers if kind == "power" else rates
    old = vec[idx]
    vec[idx] = old * factor
    if constrained:
        others = np.ones(vec.size, dtype=bool)
        others[idx] = False
        rest = vec[others].sum()
        if rest <= 0:
            return None
        vec[others] *= 1.0 - (vec[idx] - old) / rest
    if np.any(powers < 0) or np.any(rates < 0):
        return None
    return powers, rates


def sensitivity_finite_difference(cfg: SystemConfig, spec: RateSpec, strategy: str, parameter: str,
                                  step: float = 1e-4, objective: str = "exact",
                                  constrained: bool = False, alloc=None, diagnostics=None):
    """Finite-difference and multiplier sensitivities at the optimum.

    Parameters
    ----------
    parameter : str
        ``'power_i'`` or ``'rate_i'``.
    step : float
        Relative perturbation ``h`` in ``[1e-6, 1e-2]``.
    objective : {'exact', 'approx'}
        Outage function used both for the optimum and for the difference.
    constrained : bool
        If true, the other entries of the same vector absorb the change so
        the budget still holds; otherwise the perturbation is unilateral.
    alloc, diagnostics
        Optional precomputed optimum (skips the solve).

    Returns
    -------
    (SensitivityReport, SensitivityReport)
        Finite-difference report and multiplier report.  When the backward
        point is infeasible a forward difference is used and the report
        carries ``one_sided=True``.
    """
    if not 1e-6 <= step <= 1e-2:
        raise ValueError(f"relative step must lie in [1e-6, 1e-2], got {step}")
    kind, idx = _parse_parameter(parameter, cfg.m)
    if alloc is None:
        alloc, diagnostics = optimum(cfg, spec, strategy, objective)
    fn = exact_outage if objective == "exact" else approx_outage
    powers, rates = alloc.powers, alloc.rates
    u = (powers if kind == "power" else rates)[idx]
    p0 = fn(cfg, powers, rates)
    if not 0 < p0 < 1:
        raise ValueError(f"optimized outage {p0} must lie in (0, 1)")

    def value(factor):
        pt = _perturbed(powers, rates, kind, idx, factor, constrained)
        if pt is None:
            return None
        p = fn(cfg, *pt)
        return p if np.isfinite(p) and 0 <= p <= 1 else None

    one_sided = False
    if u == 0:
        fd = 0.0
    else:
        plus, minus = value(1 + step), value(1 - step)
        if plus is not None and minus is not None:
            fd = abs(plus - minus) / (2 * step * p0)
        else:
            one_sided = True
            side = plus if plus is not None else minus
            if side is None:
                raise ValueError(f"both perturbations of {parameter} leave the feasible region")
            fd = abs(side - p0) / (step * p0)
    fd_report = SensitivityReport(parameter, float(fd), "finite_difference", objective,
                                  one_sided, constrained)

    nu = math.nan
    if diagnostics is not None:
        nu = diagnostics.multiplier_power if kind == "power" else diagnostics.multiplier_rate
    if not np.isfinite(nu):
        nu = 0.0 if u == 0 else math.nan
    mult = abs(nu) * u / p0 if u != 0 else 0.0
    if not np.isfinite(mult):
        raise ValueError(f"no {kind} multiplier available for {strategy}")
    return fd_report, SensitivityReport(parameter, float(mult), "multiplier", objective)
