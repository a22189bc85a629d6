import math
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from codedvblast.errors import ConfigError
from codedvblast.experiments import (
    SweepConfig,
    SweepRow,
    parse_config,
    read_csv,
    rows_to_csv,
    run_sweep,
    strategy_allocations,
    write_csv,
)
from codedvblast.outage import RateSpec

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


def test_defaults():
    cfg = parse_config("# nothing but a comment\n")
    assert (cfg.n, cfg.m, cfg.gap_db, cfg.mc_trials) == (2, 2, 0.0, 0)
    assert cfg == SweepConfig()
    assert cfg.snr_points_db.tolist() == [0, 5, 10, 15, 20, 25, 30, 35, 40]


def test_parse_full_config_and_units():
    cfg = parse_config("n = 4\nm = 3\nsnr_db = 10, 20, 2.5  # dB\ngap_db = 3\n"
                       "rate_mode = bits\nrate = 2\nstrategies = apa, ara\nmc_trials = 10\nseed = 0x10\n")
    assert (cfg.n, cfg.m, cfg.seed) == (4, 3, 16)
    assert cfg.snr_points_db.tolist() == [10, 12.5, 15, 17.5, 20]
    assert cfg.strategies == ("apa", "ara")
    sys20 = cfg.system(20.0)
    assert sys20.snr == pytest.approx(100.0 / 10**0.3)
    assert cfg.rate_spec().rate(sys20) == pytest.approx(2 * math.log(2))


@pytest.mark.parametrize("text,line,field", [
    ("n = 2\nsnr_db = 0, 10, -1\n", 2, "snr_db"),
    ("n = 2\nm = 2\nfoo = 1\n", 3, "foo"),
    ("n = 2\nn = 3\n", 2, "n"),
    ("rate = abc\n", 1, "rate"),
    ("just words\n", 1, None),
    ("m = 3\n", 1, "m"),
    ("strategies = apa, bogus\n", 1, "strategies"),
    ("snr_db = 0, 10\n", 1, "snr_db"),
])
def test_config_errors_carry_location(text, line, field):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.line == line
    assert info.value.field == field
    assert f"line {line}" in str(info.value)


def test_config_validation_direct():
    for kwargs in ({"snr_step_db": 0.0}, {"rate": -1.0}, {"strategies": ()}, {"objective": "x"},
                   {"mc_trials": -1}, {"seed": -1}, {"rate_mode": "dB"}, {"snr_stop_db": -10.0}):
        with pytest.raises(ConfigError):
            SweepConfig(**kwargs)


def test_checked_in_recipes_parse():
    files = sorted(CONFIG_DIR.glob("*.cfg"))
    assert len(files) >= 6
    for path in files:
        cfg = parse_config(path)
        assert cfg.snr_points_db.size >= 2
    with pytest.raises(ConfigError):
        parse_config(CONFIG_DIR / "missing.cfg")


def test_strategy_allocations():
    sc = SweepConfig()
    cfg = sc.system(30.0)
    spec = RateSpec.multiplexing(1.0)
    closed, opt = strategy_allocations(cfg, spec, "uniform")
    assert closed is opt and opt.powers.tolist() == [1.0, 1.0]
    closed, _ = strategy_allocations(SweepConfig(n=4, m=4).system(10.0), RateSpec.fixed(3.0), "apa")
    assert closed is None  # the closed-form APA is infeasible here
    with pytest.raises(ValueError):
        strategy_allocations(cfg, spec, "best")


def test_sweep_ordering_and_columns():
    config = SweepConfig(snr_start_db=0, snr_stop_db=40, snr_step_db=5)
    rows = run_sweep(config)
    assert len(rows) == 9 * 4
    for k in range(9):
        chunk = {r.strategy: r for r in rows[4 * k: 4 * k + 4]}
        p = [chunk[s].p_out_exact for s in ("apra", "ara", "apa", "uniform")]
        assert all(a <= b * (1 + 1e-9) for a, b in zip(p, p[1:]))
        for r in chunk.values():
            assert 0 <= r.p_out_exact <= 1 and 0 <= r.p_out_approx <= 1
            assert r.error == ""
        assert math.isfinite(chunk["apa"].snr_gain_db)
        assert math.isnan(chunk["ara"].snr_gain_db)
    # with R = (r/m) ln snr the uniform curve falls like snr^{-(n-m+1)(1-r/m)}
    uni = [r.diversity_running for r in rows if r.strategy == "uniform"]
    assert uni[-1] == pytest.approx(0.5, abs=0.05)


def test_sweep_is_deterministic_and_worker_independent():
    config = SweepConfig(snr_start_db=5, snr_stop_db=15, snr_step_db=5, mc_trials=5000, seed=7)
    a = rows_to_csv(run_sweep(config), 2)
    b = rows_to_csv(run_sweep(config, workers=4), 2)
    assert a == b
    c = rows_to_csv(run_sweep(replace(config, seed=8)), 2)
    assert c != a
    for row in run_sweep(config):
        assert abs(row.p_out_mc - row.p_out_exact) < 5 * max(row.mc_stderr, 1e-4)


def test_failed_point_is_recorded():
    # an out-of-range multiplexing gain fails per row; the sweep goes on
    rows = run_sweep(SweepConfig(rate=2.5, snr_start_db=10, snr_stop_db=20, snr_step_db=10,
                                 strategies=("uniform", "ara")))
    assert len(rows) == 4
    assert all(r.error for r in rows)
    assert all(math.isnan(r.p_out_exact) for r in rows)


def quantize(row):
    q = lambda x: float("%.6e" % x)
    return replace(row, snr_db=q(row.snr_db), p_out_exact=q(row.p_out_exact),
                   p_out_approx=q(row.p_out_approx), p_out_closed_form=q(row.p_out_closed_form),
                   p_out_mc=q(row.p_out_mc), mc_stderr=q(row.mc_stderr),
                   powers=tuple(q(x) for x in row.powers), rates=tuple(q(x) for x in row.rates),
                   snr_gain_db=q(row.snr_gain_db), diversity_running=q(row.diversity_running))


def rows_equal(a, b):
    def norm(r):
        return [("nan" if isinstance(v, float) and math.isnan(v) else v)
                for v in (r.snr_db, r.strategy, r.p_out_exact, r.p_out_approx, r.p_out_closed_form,
                          r.p_out_mc, r.mc_stderr, r.m_active, r.powers, r.rates, r.snr_gain_db,
                          r.diversity_running, r.error)]
    return norm(a) == norm(b)


def test_csv_round_trip(tmp_path):
    rows = [quantize(r) for r in run_sweep(SweepConfig(snr_start_db=10, snr_stop_db=20, snr_step_db=10,
                                                        mc_trials=1000, seed=3))]
    rows.append(SweepRow(30.0, "ara", error='ValueError: "quoted", with comma'))
    path = tmp_path / "out.csv"
    write_csv(rows, path, 2)
    back = read_csv(path)
    assert len(back) == len(rows)
    assert all(rows_equal(a, b) for a, b in zip(rows, back))
    text = path.read_bytes()
    assert b"\r\n" in text and text.startswith(b"snr_db,strategy,p_out_exact")
    assert all(rows_equal(a, b) for a, b in zip(rows, read_csv(text.decode())))


def test_csv_float_format():
    text = rows_to_csv([SweepRow(12.5, "uniform", p_out_exact=0.0123456789, powers=(1.0, 1.0),
                                 rates=(1.0, 1.0))], 2)
    line = text.splitlines()[1].split(",")
    assert line[0] == "1.250000e+01" and line[2] == "1.234568e-02"
    assert np.isnan(float(line[3]))
