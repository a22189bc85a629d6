"""SNR sweeps across allocation strategies, config files and CSV output.

Config files are flat ``key = value`` text; ``#`` starts a comment.  Keys:

==============  ===============================================  ============
key             meaning                                          default
==============  ===============================================  ============
n, m            receive / transmit antennas                      2, 2
snr_db          ``start, stop, step`` nominal SNR grid in dB     0, 40, 5
gap_db          SNR gap to capacity in dB                        0
rate_mode       ``nats``, ``bits`` or ``multiplexing``           multiplexing
rate            per-stream rate or multiplexing gain ``r``       1
strategies      comma list of uniform, apa, ara, apra            all four
objective       ``exact`` or ``approx`` for the numerical solves exact
mc_trials       Monte Carlo trials per row (0 disables)          0
seed            master seed, 0 <= seed < 2**64                   0
==============  ===============================================  ============

Monte Carlo row ``(i, j)`` (SNR index ``i``, strategy index ``j``) uses the
seed drawn from ``SeedSequence([seed, i, j])``, so rows are independent and
a sweep is reproducible regardless of evaluation order.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .apa import apa_closed_form, apa_exact, snr_gain
from .apra import apra_closed_form, apra_exact
from .ara import ara_closed_form, ara_exact
from .channel import SystemConfig, monte_carlo_outage
from .errors import ConfigError
from .outage import Allocation, RateSpec, approx_outage, exact_outage

__all__ = [
    "STRATEGY_NAMES",
    "SweepConfig",
    "SweepRow",
    "parse_config",
    "run_sweep",
    "strategy_allocations",
    "write_csv",
    "read_csv",
    "rows_to_csv",
]

STRATEGY_NAMES = ("uniform", "apa", "ara", "apra")
RATE_MODES = ("nats", "bits", "multiplexing")


@dataclass(frozen=True)
class SweepConfig:
    n: int = 2
    m: int = 2
    snr_start_db: float = 0.0
    snr_stop_db: float = 40.0
    snr_step_db: float = 5.0
    gap_db: float = 0.0
    rate_mode: str = "multiplexing"
    rate: float = 1.0
    strategies: tuple = STRATEGY_NAMES
    objective: str = "exact"
    mc_trials: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.m < 1 or self.n < self.m:
            raise ConfigError(f"need n >= m >= 1, got n={self.n}, m={self.m}", field="m")
        if not self.snr_step_db > 0:
            raise ConfigError(f"step must be positive, got {self.snr_step_db}", field="snr_db")
        if self.snr_stop_db < self.snr_start_db:
            raise ConfigError("stop below start", field="snr_db")
        if self.rate_mode not in RATE_MODES:
            raise ConfigError(f"must be one of {RATE_MODES}", field="rate_mode")
        if not self.rate > 0 or not math.isfinite(self.rate):
            raise ConfigError(f"must be positive, got {self.rate}", field="rate")
        if not self.strategies:
            raise ConfigError("at least one strategy is required", field="strategies")
        bad = [s for s in self.strategies if s not in STRATEGY_NAMES]
        if bad:
            raise ConfigError(f"unknown strategies {bad}", field="strategies")
        if self.objective not in ("exact", "approx"):
            raise ConfigError("must be 'exact' or 'approx'", field="objective")
        if self.mc_trials < 0:
            raise ConfigError("must be nonnegative", field="mc_trials")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("must be a 64-bit unsigned integer", field="seed")

    @property
    def snr_points_db(self) -> np.ndarray:
        count = int(math.floor((self.snr_stop_db - self.snr_start_db) / self.snr_step_db + 1e-9)) + 1
        return self.snr_start_db + self.snr_step_db * np.arange(count)

    def rate_spec(self) -> RateSpec:
        if self.rate_mode == "multiplexing":
            return RateSpec.multiplexing(self.rate)
        if self.rate_mode == "bits":
            return RateSpec.fixed(self.rate * math.log(2.0))
        return RateSpec.fixed(self.rate)

    def system(self, snr_db: float) -> SystemConfig:
        return SystemConfig.from_db(self.n, self.m, snr_db, self.gap_db)


def _int(text):
    value = int(text, 0)
    return value


def _float(text):
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"{text!r} is not finite")
    return value


def _strategies(text):
    items = tuple(s.strip().lower() for s in text.split(",") if s.strip())
    if not items:
        raise ValueError("empty strategy list")
    return items


_SCALAR_KEYS = {
    "n": _int, "m": _int, "gap_db": _float, "rate": _float, "mc_trials": _int, "seed": _int,
    "rate_mode": lambda s: s.strip().lower(), "objective": lambda s: s.strip().lower(),
    "strategies": _strategies,
}


def parse_config(source) -> SweepConfig:
    """Parse a config from a path or from its text.

    Raises
    ------
    ConfigError
        With the offending line and field for unknown keys, malformed lines,
        duplicate keys and invalid values.
    """
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source
                                    and "=" not in source):
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
    else:
        text = str(source)

    values = {}
    where = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().lower()
        if not sep or not key:
            raise ConfigError("expected 'key = value'", line=lineno)
        if key in values:
            raise ConfigError("duplicate key", line=lineno, field=key)
        value = value.strip()
        try:
            if key == "snr_db":
                parts = [_float(p) for p in value.split(",")]
                if len(parts) != 3:
                    raise ValueError("expected 'start, stop, step'")
                values["snr_start_db"], values["snr_stop_db"], values["snr_step_db"] = parts
            elif key in _SCALAR_KEYS:
                values[key] = _SCALAR_KEYS[key](value)
            else:
                raise ConfigError("unknown key", line=lineno, field=key)
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc), line=lineno, field=key) from exc
        where[key] = lineno
        if key == "snr_db":
            for k in ("snr_start_db", "snr_stop_db", "snr_step_db"):
                where[k] = lineno

    try:
        return SweepConfig(**values)
    except ConfigError as exc:
        line = where.get(exc.field)
        if line is None and exc.field == "snr_db":
            line = where.get("snr_start_db")
        if line is None:
            raise
        raise ConfigError(str(exc).split(": ", 1)[-1], line=line, field=exc.field) from None


@dataclass
class SweepRow:
    snr_db: float
    strategy: str
    p_out_exact: float = math.nan
    p_out_approx: float = math.nan
    p_out_closed_form: float = math.nan
    p_out_mc: float = math.nan
    mc_stderr: float = math.nan
    m_active: int = 0
    powers: tuple = ()
    rates: tuple = ()
    snr_gain_db: float = math.nan
    diversity_running: float = math.nan
    error: str = ""


def strategy_allocations(cfg: SystemConfig, spec: RateSpec, strategy: str, objective: str = "exact"):
    """Closed-form and numerically optimized allocations of one strategy.

    Returns ``(closed_form, optimized)``; ``closed_form`` is ``None`` when
    the closed form cannot be formed at this point.
    """
    rate = spec.rate(cfg)
    if strategy == "uniform":
        alloc = Allocation.uniform(cfg.m, rate)
        return alloc, alloc
    closed = None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            if strategy == "apa":
                closed = apa_closed_form(cfg, rate)[0]
            elif strategy == "ara":
                closed = ara_closed_form(cfg, spec)[0]
            elif strategy == "apra":
                closed = apra_closed_form(cfg, spec)
            else:
                raise ValueError(f"unknown strategy {strategy!r}")
        except ValueError as exc:
            if str(exc).startswith("unknown strategy"):
                raise
            closed = None
        if strategy == "apa":
            opt = apa_exact(cfg, rate)[0]
        elif strategy == "ara":
            opt = ara_exact(cfg, spec, objective=objective)[0]
        else:
            opt = apra_exact(cfg, spec, objective=objective)[0]
    return closed, opt


def _mc_seed(seed, i, j):
    return int(np.random.SeedSequence([seed, i, j]).generate_state(1, dtype=np.uint64)[0])


def _evaluate(config: SweepConfig, i: int, j: int, snr_db: float, strategy: str) -> SweepRow:
    row = SweepRow(float(snr_db), strategy)
    cfg = config.system(snr_db)
    spec = config.rate_spec()
    try:
        closed, opt = strategy_allocations(cfg, spec, strategy, config.objective)
    except Exception as exc:  # a failed point must not stop the sweep
        row.error = f"{type(exc).__name__}: {exc}"
        return row
    row.p_out_exact = exact_outage(cfg, opt.powers, opt.rates)
    row.p_out_approx = min(1.0, approx_outage(cfg, opt.powers, opt.rates))
    if closed is not None:
        row.p_out_closed_form = exact_outage(cfg, closed.powers, closed.rates)
    row.m_active = opt.active_count
    row.powers = tuple(float(a) for a in opt.powers)
    row.rates = tuple(float(r) for r in opt.rates)
    if strategy == "apa" and 0 < row.p_out_exact < 1:
        try:
            row.snr_gain_db = snr_gain(cfg, spec.rate(cfg), opt).gain_db
        except Exception as exc:
            row.error = f"snr gain: {exc}"
    if config.mc_trials > 0:
        est = monte_carlo_outage(cfg, opt, config.mc_trials, _mc_seed(config.seed, i, j))
        row.p_out_mc, row.mc_stderr = est.p_out, est.stderr
    return row


def _running_diversity(rows, snr_points_db):
    """Local slope ``-d ln P / d ln snr`` along each strategy's curve."""
    if len(snr_points_db) < 2:
        return
    log_snr = np.asarray(snr_points_db) * math.log(10.0) / 10.0
    by_strategy = {}
    for row in rows:
        by_strategy.setdefault(row.strategy, []).append(row)
    for series in by_strategy.values():
        p = np.array([r.p_out_exact for r in series])
        with np.errstate(divide="ignore", invalid="ignore"):
            slope = -np.gradient(np.log(p), log_snr)
        for r, d in zip(series, slope):
            r.diversity_running = float(d) if np.isfinite(d) else math.nan


def run_sweep(config: SweepConfig, workers: int = 1) -> list:
    """Evaluate every (SNR point, strategy) pair.

    Rows come back ordered by SNR, then by the strategy order of the
    config, whatever ``workers`` is.
    """
    points = config.snr_points_db
    jobs = [(i, j, s, name) for i, s in enumerate(points) for j, name in enumerate(config.strategies)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda job: _evaluate(config, *job), jobs))
    else:
        rows = [_evaluate(config, *job) for job in jobs]
    _running_diversity(rows, points)
    return rows


def _header(m):
    return (["snr_db", "strategy", "p_out_exact", "p_out_approx", "p_out_closed_form", "p_out_mc",
             "mc_stderr", "m_A"]
            + [f"alpha_{i}" for i in range(1, m + 1)]
            + [f"rate_{i}" for i in range(1, m + 1)]
            + ["snr_gain_db", "diversity_running", "error"])


def _num(x):
    return "%.6e" % x


def rows_to_csv(rows, m: int) -> str:
    """CSV text: header, one line per row, floats as ``%.6e``."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(_header(m))
    for r in rows:
        powers = r.powers if r.powers else (math.nan,) * m
        rates = r.rates if r.rates else (math.nan,) * m
        writer.writerow([_num(r.snr_db), r.strategy, _num(r.p_out_exact), _num(r.p_out_approx),
                         _num(r.p_out_closed_form), _num(r.p_out_mc), _num(r.mc_stderr), r.m_active]
                        + [_num(a) for a in powers] + [_num(x) for x in rates]
                        + [_num(r.snr_gain_db), _num(r.diversity_running), r.error])
    return buf.getvalue()


def write_csv(rows, path, m: int) -> None:
    Path(path).write_text(rows_to_csv(rows, m), newline="")


def read_csv(source) -> list:
    """Read rows written by :func:`write_csv` (path or CSV text)."""
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
        with open(source, newline="") as fh:
            text = fh.read()
    else:
        text = source
    reader = csv.reader(io.StringIO(text, newline=""))
    header = next(reader)
    m = sum(1 for h in header if h.startswith("alpha_"))
    rows = []
    for rec in reader:
        if not rec:
            continue
        d = dict(zip(header, rec))
        powers = tuple(float(d[f"alpha_{i}"]) for i in range(1, m + 1))
        rates = tuple(float(d[f"rate_{i}"]) for i in range(1, m + 1))
        if all(math.isnan(v) for v in powers + rates):
            powers = rates = ()
        rows.append(SweepRow(
            snr_db=float(d["snr_db"]), strategy=d["strategy"],
            p_out_exact=float(d["p_out_exact"]), p_out_approx=float(d["p_out_approx"]),
            p_out_closed_form=float(d["p_out_closed_form"]), p_out_mc=float(d["p_out_mc"]),
            mc_stderr=float(d["mc_stderr"]), m_active=int(d["m_A"]), powers=powers, rates=rates,
            snr_gain_db=float(d["snr_gain_db"]), diversity_running=float(d["diversity_running"]),
            error=d["error"]))
    return rows
