"""Command-line front end.

Subcommands: ``allocate``, ``sweep``, ``sensitivity``, ``dual`` and
``mc-validate``.  Exit status is 0 on success, 2 on a configuration or
argument error and 3 when a solver fails.
"""

from __future__ import annotations

import argparse
import math
import sys
import warnings
from dataclasses import replace

import numpy as np

from .channel import monte_carlo_outage
from .duality import DualConstraint, max_total_rate, min_total_power
from .errors import AllocationError, ConfigError, InfeasibleError, SolverError
from .experiments import STRATEGY_NAMES, SweepConfig, parse_config, rows_to_csv, run_sweep, strategy_allocations
from .outage import approx_outage, exact_outage, stream_outages
from .robustness import optimum, sensitivity_closed_form, sensitivity_finite_difference

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3


def _point_args(p, strategy=True):
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--snr-db", type=float, required=True, help="nominal SNR in dB")
    p.add_argument("--gap-db", type=float, default=0.0)
    p.add_argument("--rate-mode", choices=("nats", "bits", "multiplexing"), default="multiplexing")
    p.add_argument("--rate", type=float, default=1.0, help="per-stream rate or multiplexing gain")
    p.add_argument("--objective", choices=("exact", "approx"), default="exact")
    if strategy:
        p.add_argument("--strategy", choices=STRATEGY_NAMES, default="apra")


def _sweep_config(args) -> SweepConfig:
    return SweepConfig(n=args.n, m=args.m, snr_start_db=args.snr_db, snr_stop_db=args.snr_db,
                       snr_step_db=1.0, gap_db=args.gap_db, rate_mode=args.rate_mode, rate=args.rate,
                       objective=args.objective)


def _fmt(v):
    return np.array2string(np.asarray(v), precision=6, separator=", ")


def cmd_allocate(args, out):
    sc = _sweep_config(args)
    cfg, spec = sc.system(args.snr_db), sc.rate_spec()
    closed, opt = strategy_allocations(cfg, spec, args.strategy, args.objective)
    print(f"strategy      {args.strategy}", file=out)
    print(f"config        n={cfg.n} m={cfg.m} snr_eff={cfg.snr:.6g} ({cfg.snr_db:.3f} dB)", file=out)
    print(f"rate/stream   {spec.rate(cfg):.6g} nats", file=out)
    print(f"powers        {_fmt(opt.powers)}", file=out)
    print(f"rates         {_fmt(opt.rates)}", file=out)
    print(f"active        {opt.active_count}", file=out)
    print(f"per-stream    {_fmt(stream_outages(cfg, opt.powers, opt.rates))}", file=out)
    print(f"p_out exact   {exact_outage(cfg, opt.powers, opt.rates):.6e}", file=out)
    print(f"p_out approx  {approx_outage(cfg, opt.powers, opt.rates):.6e}", file=out)
    if closed is not None:
        print(f"closed form   powers {_fmt(closed.powers)} rates {_fmt(closed.rates)}", file=out)
        print(f"p_out closed  {exact_outage(cfg, closed.powers, closed.rates):.6e}", file=out)
    else:
        print("closed form   not available at this point", file=out)
    return EXIT_OK


_OVERRIDES = ("n", "m", "gap_db", "rate_mode", "rate", "objective", "mc_trials", "seed")


def cmd_sweep(args, out):
    config = parse_config(args.config) if args.config else SweepConfig()
    changes = {k: getattr(args, k) for k in _OVERRIDES if getattr(args, k) is not None}
    if args.snr_db is not None:
        changes["snr_start_db"], changes["snr_stop_db"], changes["snr_step_db"] = args.snr_db
    if args.strategies is not None:
        changes["strategies"] = tuple(s.strip().lower() for s in args.strategies.split(",") if s.strip())
    if changes:
        config = replace(config, **changes)
    rows = run_sweep(config, workers=args.workers)
    text = rows_to_csv(rows, config.m)
    if args.output:
        with open(args.output, "w", newline="") as fh:
            fh.write(text)
    else:
        out.write(text)
    return EXIT_OK


def cmd_sensitivity(args, out):
    sc = _sweep_config(args)
    cfg, spec = sc.system(args.snr_db), sc.rate_spec()
    strategy = args.strategy.upper()
    closed = {r.parameter: r.delta for r in sensitivity_closed_form(cfg, spec, strategy)}
    alloc, diag = optimum(cfg, spec, strategy, args.objective)
    # each strategy only has multipliers for the variables it optimizes
    params = []
    if strategy in ("APA", "APRA"):
        params += [f"power_{i}" for i in range(1, cfg.m + 1)]
    if strategy in ("ARA", "APRA"):
        params += [f"rate_{i}" for i in range(1, cfg.m + 1)]
    print(f"{'parameter':<10} {'closed_form':>12} {'fin_diff':>12} {'multiplier':>12}", file=out)
    for name in params:
        fd, mult = sensitivity_finite_difference(cfg, spec, strategy, name, args.step, args.objective,
                                                 alloc=alloc, diagnostics=diag)
        cf = closed.get(name, math.nan)
        flag = " (one-sided)" if fd.one_sided else ""
        print(f"{name:<10} {cf:12.6g} {fd.delta:12.6g} {mult.delta:12.6g}{flag}", file=out)
    return EXIT_OK


def cmd_dual(args, out):
    sc = _sweep_config(args)
    cfg, spec = sc.system(args.snr_db), sc.rate_spec()
    constraint = DualConstraint(args.epsilon)
    if args.kind == "power":
        alloc, total = min_total_power(cfg, spec.rate(cfg), constraint)
        print(f"min total power {total:.9g} (budget m={cfg.m})", file=out)
    else:
        alloc, total = max_total_rate(cfg, constraint, objective=args.objective)
        print(f"max total rate  {total:.9g} nats", file=out)
    print(f"powers          {_fmt(alloc.powers)}", file=out)
    print(f"rates           {_fmt(alloc.rates)}", file=out)
    print(f"p_out exact     {exact_outage(cfg, alloc.powers, alloc.rates):.9e}", file=out)
    return EXIT_OK


def cmd_mc_validate(args, out):
    sc = _sweep_config(args)
    cfg, spec = sc.system(args.snr_db), sc.rate_spec()
    _, opt = strategy_allocations(cfg, spec, args.strategy, args.objective)
    exact = exact_outage(cfg, opt.powers, opt.rates)
    est = monte_carlo_outage(cfg, opt, args.trials, args.seed, shards=args.shards, workers=args.workers)
    z = (est.p_out - exact) / est.stderr if est.stderr > 0 else math.inf
    print(f"exact     {exact:.6e}", file=out)
    print(f"mc        {est.p_out:.6e} +- {est.stderr:.3e} ({est.outages}/{est.trials}, seed {est.seed})",
          file=out)
    print(f"z         {z:+.3f}  {'within' if abs(z) <= 3 else 'outside'} 3 stderr", file=out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="codedvblast",
                                     description="Power and rate allocation for coded ZF V-BLAST.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("allocate", help="optimize one operating point")
    _point_args(p)
    p.set_defaults(func=cmd_allocate)

    p = sub.add_parser("sweep", help="SNR sweep to CSV")
    p.add_argument("--config", help="config file (flat key = value)")
    p.add_argument("--output", "-o", help="CSV path (default: stdout)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--snr-db", type=float, nargs=3, metavar=("START", "STOP", "STEP"))
    p.add_argument("--gap-db", type=float)
    p.add_argument("--rate-mode", choices=("nats", "bits", "multiplexing"))
    p.add_argument("--rate", type=float)
    p.add_argument("--strategies", help="comma list of " + ", ".join(STRATEGY_NAMES))
    p.add_argument("--objective", choices=("exact", "approx"))
    p.add_argument("--mc-trials", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("sensitivity", help="local sensitivities at the optimum")
    _point_args(p, strategy=False)
    p.add_argument("--strategy", choices=("apa", "ara", "apra"), default="apra")
    p.add_argument("--step", type=float, default=1e-4, help="relative finite-difference step")
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("dual", help="min power or max rate for an outage target")
    _point_args(p, strategy=False)
    p.add_argument("--kind", choices=("power", "rate"), default="power")
    p.add_argument("--epsilon", type=float, required=True)
    p.set_defaults(func=cmd_dual)

    p = sub.add_parser("mc-validate", help="compare exact outage with Monte Carlo")
    _point_args(p)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shards", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_mc_validate)
    return parser


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return args.func(args, out)
    except (SolverError, AllocationError, InfeasibleError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ConfigError, ValueError, IndexError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
