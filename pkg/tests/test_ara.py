import math
import warnings

import numpy as np
import pytest
from scipy import optimize

from codedvblast.ara import (
    ara_active_set_by_positivity,
    ara_candidate_rates,
    ara_closed_form,
    ara_coefficients,
    ara_diversity,
    ara_exact,
    ara_predicted_outage,
    ara_printed_outage,
    refine_rates_exact,
    water_fill_rates,
)
from codedvblast.channel import SystemConfig
from codedvblast.errors import FormulaWarning, ValidityWarning
from codedvblast.outage import RateSpec, approx_outage, exact_outage, rate_derivatives


def slsqp_rates(cfg, powers, total, fn):
    m = cfg.m
    res = optimize.minimize(lambda r: math.log(fn(cfg, powers, r)), np.full(m, total / m),
                            method="SLSQP", bounds=[(0, total)] * m,
                            constraints=[{"type": "eq", "fun": lambda r: r.sum() - total}],
                            options={"ftol": 1e-15, "maxiter": 1000})
    return res.x


def test_coefficients():
    c = ara_coefficients(2, 2, 2)
    assert c.a == pytest.approx(0.0) and c.b == pytest.approx(1.5)
    assert c.c == pytest.approx([0.0, 0.0])
    # n = m = m_A: b is the harmonic number
    assert ara_coefficients(4, 4, 4).b == pytest.approx(1 + 1 / 2 + 1 / 3 + 1 / 4)
    with pytest.raises(ValueError):
        ara_coefficients(2, 2, 3)


def test_closed_form_worked_example():
    cfg = SystemConfig.from_db(2, 2, 30.0)
    alloc, coef = ara_closed_form(cfg, RateSpec.fixed(2.302585))
    assert alloc.rates == pytest.approx([0.767528, 3.837642], abs=1e-6)
    assert coef.active_count == 2
    assert alloc.total_rate == pytest.approx(2 * 2.302585)


@pytest.mark.parametrize("n,m,snr_db,r", [(2, 2, 30, 1.0), (4, 4, 25, 2.0), (4, 3, 20, 1.0)])
def test_candidate_rates_sum_to_total(n, m, snr_db, r):
    cfg = SystemConfig.from_db(n, m, snr_db)
    total = RateSpec.multiplexing(r).total_rate(cfg)
    for k in range(1, m + 1):
        rates, _ = ara_candidate_rates(cfg, total, k)
        assert rates.sum() == pytest.approx(total)
        assert np.all(rates[: m - k] == 0)


def test_low_snr_drops_weak_stream():
    cfg = SystemConfig.from_db(2, 2, 5.0)
    spec = RateSpec.multiplexing(1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        alloc, coef = ara_closed_form(cfg, spec)
    assert coef.active_count == 1 and alloc.rates[0] == 0
    # both candidates are positive here; the single-stream one wins on exact outage
    assert ara_active_set_by_positivity(cfg, spec) == 2
    total = spec.total_rate(cfg)
    one, _ = ara_candidate_rates(cfg, total, 1)
    two, _ = ara_candidate_rates(cfg, total, 2)
    assert exact_outage(cfg, np.ones(2), one) < exact_outage(cfg, np.ones(2), two)
    assert ara_active_set_by_positivity(SystemConfig.from_db(2, 2, 40.0), spec) == 2


def test_closed_form_warns_outside_regime():
    with pytest.warns(ValidityWarning):
        ara_closed_form(SystemConfig.from_db(2, 2, 30.0), RateSpec.fixed(0.5))


@pytest.mark.parametrize("powers", [[1.0, 1.0, 1.0], [1.8, 0.7, 0.5], [0.0, 1.5, 1.5]])
def test_water_filling_matches_slsqp(powers):
    cfg = SystemConfig.from_db(3, 3, 25.0)
    powers = np.array(powers)
    total = 6.0
    rates, nu, _ = water_fill_rates(cfg, total, powers)
    assert rates.sum() == pytest.approx(total, rel=1e-14)
    assert np.all(rates[powers == 0] == 0)
    on = powers > 0
    if on.all():
        ref = slsqp_rates(cfg, powers, total, approx_outage)
        assert approx_outage(cfg, powers, rates) <= approx_outage(cfg, powers, ref) * (1 + 1e-9)
    slopes = rate_derivatives(cfg, np.where(on, powers, 1.0), rates)
    act = rates > 0
    assert slopes[act] == pytest.approx(np.full(act.sum(), nu), rel=1e-8)


def test_water_filling_clamps_at_zero():
    # tiny total rate: the first-order stream (slope 1/(alpha snr) at R=0) stays off
    cfg = SystemConfig.from_db(2, 2, 20.0)
    rates, nu, _ = water_fill_rates(cfg, 0.2, np.ones(2))
    assert rates[0] == 0.0 and rates[1] == pytest.approx(0.2)
    assert rate_derivatives(cfg, np.ones(2), rates)[0] >= nu


@pytest.mark.parametrize("n,m,snr_db,r", [(2, 2, 30, 2 / 3), (3, 3, 30, 1.5), (4, 4, 35, 2.0)])
def test_exact_objective_refinement_matches_slsqp(n, m, snr_db, r):
    cfg = SystemConfig.from_db(n, m, snr_db)
    spec = RateSpec.multiplexing(r)
    alloc, diag = ara_exact(cfg, spec, objective="exact")
    assert diag.converged
    ref = slsqp_rates(cfg, np.ones(m), spec.total_rate(cfg), exact_outage)
    assert exact_outage(cfg, alloc.powers, alloc.rates) <= exact_outage(cfg, np.ones(m), ref) * (1 + 1e-8)
    assert alloc.total_rate == pytest.approx(spec.total_rate(cfg))


def test_refine_rates_exact_improves_on_first_order_point():
    cfg = SystemConfig.from_db(2, 2, 15.0)
    spec = RateSpec.multiplexing(2 / 3)
    approx, _ = ara_exact(cfg, spec)
    rates, nu, res = refine_rates_exact(cfg, approx.powers, approx.rates, spec.total_rate(cfg))
    assert res.converged and nu > 0
    assert exact_outage(cfg, approx.powers, rates) <= exact_outage(cfg, approx.powers, approx.rates)


def test_exact_solver_diagnostics_and_flags():
    cfg = SystemConfig.from_db(2, 2, 30.0)
    alloc, diag = ara_exact(cfg, RateSpec.multiplexing(1.0))
    assert diag.converged and diag.residual < 1e-9 and diag.multiplier_rate > 0
    _, diag = ara_exact(cfg, RateSpec.fixed(0.4))
    assert "outside-validity:total-rate<1" in diag.flags
    with pytest.raises(ValueError):
        ara_exact(cfg, RateSpec.fixed(0.0))
    with pytest.raises(ValueError):
        ara_exact(cfg, RateSpec.multiplexing(1.0), objective="other")


def test_rates_increase_with_stream_order():
    cfg = SystemConfig.from_db(4, 4, 30.0)
    alloc, _ = ara_exact(cfg, RateSpec.multiplexing(2.0))
    assert np.all(np.diff(alloc.rates) > 0)


def test_closed_form_tracks_exact_solver():
    spec = RateSpec.multiplexing(2 / 3)
    for snr_db in (20, 30, 40):
        cfg = SystemConfig.from_db(2, 2, snr_db)
        cf, _ = ara_closed_form(cfg, spec)
        ex, _ = ara_exact(cfg, spec)
        assert cf.rates[1] == pytest.approx(ex.rates[1], rel=0.05)


def test_predicted_outage_all_active_matches_printed():
    cfg = SystemConfig.from_db(2, 2, 40.0)
    spec = RateSpec.multiplexing(1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        rep, div = ara_predicted_outage(cfg, spec)
    assert rep.system_approx == pytest.approx(ara_printed_outage(cfg, spec, 2))
    assert div.slope == pytest.approx(ara_diversity(cfg, spec, 2))
    ex, _ = ara_exact(cfg, spec)
    assert rep.system_exact == pytest.approx(exact_outage(cfg, ex.powers, ex.rates), rel=0.15)


def test_printed_constant_is_off_for_single_active():
    # direct evaluation gives (1/2) e^{2T} / snr^2; the printed constant doubles it
    cfg = SystemConfig.from_db(2, 2, 3.0)
    spec = RateSpec.multiplexing(1.0)
    with pytest.warns(FormulaWarning):
        rep, _ = ara_predicted_outage(cfg, spec)
    total = spec.total_rate(cfg)
    assert rep.system_approx == pytest.approx(0.5 * math.exp(2 * total) / cfg.snr**2)
    assert ara_printed_outage(cfg, spec, 1) == pytest.approx(2 * rep.system_approx)


def test_diversity_formula():
    spec = RateSpec.multiplexing(2 / 3)
    cfg = SystemConfig.from_db(2, 2, 30.0)
    assert ara_diversity(cfg, spec, 2) == pytest.approx(8 / 9)
    assert ara_diversity(cfg, spec, 1) == pytest.approx(2 * (1 - 2 / 3))
