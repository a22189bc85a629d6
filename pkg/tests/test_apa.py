import math
import warnings

import numpy as np
import pytest
from scipy import optimize

from codedvblast.apa import (
    POWER_FLOOR,
    apa_approx_kkt,
    apa_closed_form,
    apa_coefficients,
    apa_exact,
    apa_predicted_outage,
    snr_gain,
)
from codedvblast.channel import SystemConfig
from codedvblast.errors import AllocationError, ValidityWarning
from codedvblast.outage import Allocation, approx_outage, exact_outage


def scalar_oracle(cfg, rate, fn=exact_outage):
    # 2x2: one free variable alpha_1 in (0, 2)
    rates = np.full(2, rate)
    res = optimize.minimize_scalar(lambda a: math.log(fn(cfg, [a, 2 - a], rates)),
                                   bounds=(1e-9, 2 - 1e-9), method="bounded",
                                   options={"xatol": 1e-12})
    return np.array([res.x, 2 - res.x])


def slsqp_oracle(cfg, rate, fn=exact_outage):
    m = cfg.m
    rates = np.full(m, rate)
    res = optimize.minimize(lambda a: math.log(fn(cfg, a, rates)), np.ones(m), method="SLSQP",
                            bounds=[(1e-9, m)] * m,
                            constraints=[{"type": "eq", "fun": lambda a: a.sum() - m}],
                            options={"ftol": 1e-14, "maxiter": 500})
    return res.x


def test_coefficients_2x2():
    assert apa_coefficients(2, 2).b == pytest.approx([4 ** (1 / 3)])
    # (n-m+2) = 2, (n-m)! = 1, (n-m+i-1)! = (i-1)!
    b = apa_coefficients(3, 3).b
    assert b[0] == pytest.approx(3 ** (2 / 3))
    assert b[1] == pytest.approx((9 / 2) ** (1 / 4))


def test_closed_form_2x2_formula():
    cfg = SystemConfig.from_db(2, 2, 30.0)
    alloc, _ = apa_closed_form(cfg, 2.0)
    y = math.expm1(2.0) / 1000.0
    assert alloc.powers[1] == pytest.approx((4 * y) ** (1 / 3))
    assert alloc.powers.sum() == pytest.approx(2.0)
    assert np.all(alloc.rates == 2.0)


def test_closed_form_warns_and_fails_outside_regime():
    cfg = SystemConfig.from_db(2, 2, 3.0)
    with pytest.warns(ValidityWarning):
        apa_closed_form(cfg, 1.5)
    with pytest.raises(AllocationError):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            apa_closed_form(SystemConfig.from_db(4, 4, 10.0), 2.0)
    with pytest.raises(ValueError):
        apa_closed_form(cfg, 0.0)


@pytest.mark.parametrize("snr_db,rate", [(20, 1.0), (30, 2.0), (45, 3.0)])
def test_exact_solver_matches_scalar_oracle_2x2(snr_db, rate):
    cfg = SystemConfig.from_db(2, 2, snr_db)
    alloc, diag = apa_exact(cfg, rate)
    assert diag.converged
    ref = scalar_oracle(cfg, rate)
    assert alloc.powers == pytest.approx(ref, rel=1e-5)
    assert exact_outage(cfg, alloc.powers, alloc.rates) <= exact_outage(cfg, ref, alloc.rates) * (1 + 1e-10)


@pytest.mark.parametrize("n,m,snr_db,rate", [(3, 3, 25, 1.5), (4, 4, 30, 2.0), (5, 3, 20, 1.0)])
def test_exact_solver_matches_slsqp(n, m, snr_db, rate):
    cfg = SystemConfig.from_db(n, m, snr_db)
    alloc, diag = apa_exact(cfg, rate)
    assert diag.converged and diag.residual < 1e-9
    ref = slsqp_oracle(cfg, rate)
    p, p_ref = exact_outage(cfg, alloc.powers, alloc.rates), exact_outage(cfg, ref, alloc.rates)
    assert p <= p_ref * (1 + 1e-8)
    assert alloc.powers == pytest.approx(ref, rel=1e-3)


@pytest.mark.parametrize("n,m,snr_db,rate", [(2, 2, 30, 2.0), (3, 3, 25, 1.5), (4, 2, 20, 1.0)])
def test_approx_kkt_minimizes_first_order_objective(n, m, snr_db, rate):
    cfg = SystemConfig.from_db(n, m, snr_db)
    alloc, diag = apa_approx_kkt(cfg, rate)
    assert diag.converged
    assert alloc.total_power == pytest.approx(m, rel=1e-12)
    ref = slsqp_oracle(cfg, rate, approx_outage)
    assert approx_outage(cfg, alloc.powers, alloc.rates) <= approx_outage(cfg, ref, alloc.rates) * (1 + 1e-9)


def test_closed_form_converges_to_first_order_optimum():
    # the closed form drops higher-order terms, relative gap shrinks with SNR
    gaps = []
    for snr_db in (30, 50, 70):
        cfg = SystemConfig.from_db(3, 3, snr_db)
        cf, _ = apa_closed_form(cfg, 1.0)
        kkt, _ = apa_approx_kkt(cfg, 1.0)
        gaps.append(np.max(np.abs(cf.powers - kkt.powers) / kkt.powers))
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 1e-2


def test_power_ordering_and_floor():
    cfg = SystemConfig.from_db(4, 4, 35.0)
    alloc, _ = apa_exact(cfg, 2.0)
    assert np.all(np.diff(alloc.powers) < 0)  # first stream gets the most
    assert np.all(alloc.powers >= POWER_FLOOR)
    assert alloc.total_power == pytest.approx(4.0, rel=1e-12)


def test_single_stream_is_trivial():
    cfg = SystemConfig.from_db(3, 1, 20.0)
    alloc, diag = apa_exact(cfg, 1.0)
    assert alloc.powers == pytest.approx([1.0]) and alloc.rates == pytest.approx([1.0])
    assert diag.multiplier_power > 0
    kkt, _ = apa_approx_kkt(cfg, 1.0)
    assert kkt.powers == pytest.approx([1.0])


def test_predicted_outage_and_diversity_2x2():
    cfg = SystemConfig.from_db(2, 2, 40.0)
    rep, d = apa_predicted_outage(cfg, 2.0)
    assert d == pytest.approx([1.0, 4.0 / 3.0])
    y = math.expm1(2.0) / cfg.snr
    assert rep.per_stream[0] == pytest.approx(y / 2)
    # alpha_2 = (4y)^(1/3) gives P_2 = y^2 / (2 alpha_2^2) = y^(4/3) / 2^(7/3)
    assert rep.per_stream[1] == pytest.approx(y ** (4 / 3) / 2 ** (7 / 3), rel=1e-12)


def test_predicted_outage_is_asymptotic():
    # stream 1 is evaluated at alpha_1 = m, so the prediction only holds at high SNR
    errs = []
    for snr_db in (30, 45, 60):
        cfg = SystemConfig.from_db(2, 2, snr_db)
        rep, _ = apa_predicted_outage(cfg, 2.0)
        alloc, _ = apa_exact(cfg, 2.0)
        p = exact_outage(cfg, alloc.powers, alloc.rates)
        errs.append(abs(rep.system_exact - p) / p)
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 0.03


def test_optimized_outage_halves_uniform_2x2():
    # stream 1 dominates and gets (nearly) twice the power
    cfg = SystemConfig.from_db(2, 2, 60.0)
    alloc, _ = apa_exact(cfg, 1.0)
    ratio = exact_outage(cfg, alloc.powers, alloc.rates) / exact_outage(cfg, np.ones(2), alloc.rates)
    assert ratio == pytest.approx(0.5, abs=0.02)


def test_snr_gain_against_brute_force_scaling():
    cfg = SystemConfig.from_db(2, 2, 30.0)
    alloc, _ = apa_exact(cfg, 2.0)
    gain = snr_gain(cfg, 2.0, alloc)
    p_opt = exact_outage(cfg, alloc.powers, alloc.rates)
    g = gain.gain_linear
    assert exact_outage(cfg, [g, g], [2.0, 2.0]) == pytest.approx(p_opt, rel=1e-9)
    assert gain.gain_db == pytest.approx(10 * math.log10(g))


def test_snr_gain_approaches_ten_log_m():
    gains = [snr_gain(SystemConfig.from_db(2, 2, s), 2.0, apa_exact(SystemConfig.from_db(2, 2, s), 2.0)[0]).gain_db
             for s in (30, 40, 60, 80)]
    assert all(a < b for a, b in zip(gains, gains[1:]))
    assert gains[-1] == pytest.approx(10 * math.log10(2), abs=0.05)
    assert all(1.0 <= 10 ** (g / 10) <= 2.0 for g in gains)


def test_snr_gain_rejects_certain_outage():
    cfg = SystemConfig(2, 2, 10.0)
    with pytest.raises(ValueError):
        snr_gain(cfg, 1.0, Allocation([2.0, 0.0], [1.0, 1.0]))
