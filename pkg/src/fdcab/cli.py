"""Command-line driver.

Exit codes: 0 success, 1 validation failure, 2 bad arguments.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import ConfigError, SystemConfig, load_config, round_to_cycle
from .experiments import (
    BLOCK_LENGTH_GRID,
    SNR_DB_GRID,
    MODES,
    breakdown_for,
    sweep_block_length,
    sweep_snr,
    validate_all,
    write_csv,
    write_metadata,
)
from .montecarlo import cycle_rate_tables, efficiency_samples, trace_from_row, write_traces_csv
from .optimizer import (
    brute_force_optimum,
    cab_bound_slack,
    gain_lower_bound,
    loss_bound_cab,
    loss_bound_hd,
    t_cab_approx_simplified,
    t_hd_approx,
    t_hd_approx_simplified,
)
from .rates import delta_r_data, delta_r_ini, delta_r_ini_inv, r_zf, r_zf_closed_form
from .channel import block_rng


class UsageError(Exception):
    pass


def parse_grid(spec: str, cast=float) -> list:
    """``"500,1000,2000"`` or inclusive ``"start:stop:step"``."""
    try:
        if ":" in spec:
            start, stop, step = (float(x) for x in spec.split(":"))
            if step <= 0:
                raise ValueError
            n = int(np.floor((stop - start) / step + 1e-9)) + 1
            values = [start + i * step for i in range(n)]
        else:
            values = [float(x) for x in spec.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad grid spec {spec!r}") from None
    if not values:
        raise UsageError(f"empty grid spec {spec!r}")
    return [cast(round(v)) if cast is int else cast(v) for v in values]


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("scenario")
    g.add_argument("--config", type=Path, help="key = value scenario file")
    g.add_argument("--M", type=int)
    g.add_argument("--T", type=int)
    g.add_argument("--snr-db", type=float, dest="snr_db")
    g.add_argument("--f", type=float)
    g.add_argument("--alpha", type=float)
    g.add_argument("--trials", type=int)
    g.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=MODES, default="analytic")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", type=Path, help="CSV output path (stdout if omitted)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fdcab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep-t", help="optimal training vs block length")
    _common(p)
    p.add_argument("--grid", default=",".join(map(str, BLOCK_LENGTH_GRID)), help="block lengths")
    p.add_argument("--plot", action="store_true", help="also render a PNG next to --out")

    p = sub.add_parser("sweep-snr", help="training, efficiency and gain vs SNR")
    _common(p)
    p.add_argument("--grid", default=",".join(map(str, SNR_DB_GRID)), help="SNR points in dB")
    p.add_argument("--plot", action="store_true", help="also render a PNG next to --out")

    p = sub.add_parser("rates", help="evaluate every rate and loss formula at one point")
    _common(p)
    p.add_argument("--grid", default="1:10:1", help="pilot counts beta")

    p = sub.add_parser("optimize", help="brute-force and closed-form training plans")
    _common(p)

    p = sub.add_parser("simulate", help="Monte Carlo efficiencies at one training length")
    _common(p)
    p.add_argument("--t-train", type=int, dest="t_train", help="training symbols (default: HD closed form)")
    p.add_argument("--traces", type=Path, help="dump per-cycle CAB traces as CSV")

    p = sub.add_parser("validate", help="run the invariant suite")
    _common(p)
    p.add_argument("--quick", action="store_true", help="smaller Monte Carlo sizes")
    return parser


def _config(args) -> SystemConfig:
    overrides = {k: getattr(args, k) for k in ("M", "T", "snr_db", "f", "alpha", "trials", "seed")}
    return load_config(args.config, overrides)


def _emit(args, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    finally:
        if args.out:
            fh.close()


def _sidecar(args, cfg: SystemConfig, started: float, **extra) -> None:
    if args.out:
        write_metadata(args.out.with_suffix(".meta.json"), args.command, cfg, time.perf_counter() - started,
                       mode=args.mode, **extra)


def cmd_sweep(args, cfg: SystemConfig, started: float) -> int:
    if args.command == "sweep-t":
        rows = sweep_block_length(cfg, parse_grid(args.grid, int), args.mode, args.workers)
    else:
        rows = sweep_snr(cfg, parse_grid(args.grid, float), args.mode, args.workers)
    if args.out:
        write_csv(args.out, rows)
        _sidecar(args, cfg, started, grid=args.grid)
        if args.plot:
            from .plots import plot_block_length, plot_snr

            fig = args.out.with_suffix(".png")
            (plot_block_length if args.command == "sweep-t" else plot_snr)(rows, fig)
    else:
        write_csv(sys.stdout, rows)
    failed = [r for r in rows if r.error]
    for r in failed:
        print(f"row {r.swept}={r.value}: {r.error}", file=sys.stderr)
    return 0


def cmd_rates(args, cfg: SystemConfig, started: float) -> int:
    betas = parse_grid(args.grid, int)
    mc = r_zf(cfg, cfg.trials, block_rng(cfg.seed, 7))
    header = ["beta", "T_tr", "r_zf", "r_zf_mc", "delta_r_data", "delta_r_ini", "delta_r_ini_inv"]
    rows = [[b, b * cfg.M, r_zf_closed_form(cfg.M, cfg.P), mc, float(delta_r_data(b * cfg.M, cfg)),
             float(delta_r_ini(b, cfg)), delta_r_ini_inv(cfg)] for b in betas]
    _emit(args, header, rows)
    _sidecar(args, cfg, started)
    return 0


def cmd_optimize(args, cfg: SystemConfig, started: float) -> int:
    rb = breakdown_for(cfg, args.mode, args.workers)
    header = ["strategy", "t_star_exact", "t_star_approx", "t_star_simplified", "t_approx_rounded",
              "ar_at_exact", "ar_at_approx", "ar_genie", "loss_bound", "loss_bound_slack"]
    rows = []
    for s, simp, bound, slack in (("cab", t_cab_approx_simplified, loss_bound_cab, cab_bound_slack),
                                  ("hd", t_hd_approx_simplified, loss_bound_hd, None)):
        plan = brute_force_optimum(cfg, s, rb)
        rows.append([s, plan.t_star_exact, plan.t_star_approx, simp(cfg, rb), plan.t_approx_rounded,
                     plan.ar_at_exact, plan.ar_at_approx, rb.r_zf, bound(cfg, rb),
                     slack(cfg, rb) if slack else 0.0])
    _emit(args, header, rows)
    _sidecar(args, cfg, started)
    return 0


def cmd_simulate(args, cfg: SystemConfig, started: float) -> int:
    t = args.t_train
    if t is None:
        t = round_to_cycle(t_hd_approx(cfg), cfg.M, cfg.T, lo=2 * cfg.M)
    if t % cfg.M or not 2 * cfg.M <= t < cfg.T:
        raise UsageError(f"--t-train must be a multiple of M in [2M, T), got {t}")
    tables = cycle_rate_tables(cfg, t // cfg.M, workers=args.workers)
    n = tables.n_blocks
    header = ["strategy", "t_train", "efficiency", "se", "blocks"]
    rows = []
    cab = efficiency_samples(tables, cfg, t, "cab")
    hd = efficiency_samples(tables, cfg, t, "hd")
    for name, x in (("cab", cab), ("hd", hd), ("gain", cab - hd)):
        se = float(x.std(ddof=1) / np.sqrt(n)) if n > 1 else float("nan")
        rows.append([name, t, float(x.mean()), se, n])
    rows.append(["gain_lower_bound", t, gain_lower_bound(cfg, t), 0.0, n])
    _emit(args, header, rows)
    if args.traces:
        traces = [trace_from_row(tables.noini[i], tables.ini[i], t // cfg.M) for i in range(n)]
        write_traces_csv(args.traces, traces)
    _sidecar(args, cfg, started, t_train=t)
    return 0


def cmd_validate(args, cfg: SystemConfig, started: float) -> int:
    results = validate_all(cfg, workers=args.workers, quick=args.quick)
    for c in results:
        print(c.line())
    failed = sum(not c.passed for c in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    if args.out:
        _emit(args, ["check", "passed", "measured", "threshold", "detail"],
              [[c.name, c.passed, float(c.measured), float(c.threshold), c.detail] for c in results])
        _sidecar(args, cfg, started)
    return 1 if failed else 0


COMMANDS = {
    "sweep-t": cmd_sweep,
    "sweep-snr": cmd_sweep,
    "rates": cmd_rates,
    "optimize": cmd_optimize,
    "simulate": cmd_simulate,
    "validate": cmd_validate,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    started = time.perf_counter()
    try:
        cfg = _config(args)
        if args.workers < 1:
            raise UsageError("--workers must be ≥ 1")
        return COMMANDS[args.command](args, cfg, started)
    except (ConfigError, UsageError, FileNotFoundError) as exc:
        print(f"fdcab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
