"""Command-line runner: ``subcb run|verify|weights|bench-oracle``.

The log level is read from ``SUBCB_LOG_LEVEL`` (default ``WARNING``).
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .bandit import (C_1ME, C_HALF, loglog_slope, run_epsgreedy, run_oracle_bench,
                     run_squarecb, run_truth_baseline, run_uniform)
from .config import Builder, ExperimentConfig, build_experiment, load
from .errors import ConfigError, SubcbError
from .t_operator import CONVENTIONS, compute_weights
from .testkit import BATTERIES

log = logging.getLogger("subcb")

CSV_HEADER = ("t,context_id,matroid_id,benchmark,benchmark_method,local_opt,chosen,"
              "reward,mean_reward,pred,inst_regret_half,inst_regret_1me,"
              "cum_regret_half,cum_regret_1me")


def format_set(S) -> str:
    return "-".join(str(a) for a in sorted(S))


def format_float(x: float) -> str:
    return repr(float(x))


def records_to_csv(records) -> str:
    """Serialize round records; floats use ``repr`` so output is byte-stable."""
    out = io.StringIO()
    out.write(CSV_HEADER + "\n")
    for r in records:
        row = (str(r.t), str(r.context_id), str(r.matroid_id), format_float(r.benchmark),
               r.benchmark_method, format_set(r.local_opt), format_set(r.chosen),
               format_float(r.reward), format_float(r.mean_reward), format_float(r.pred),
               format_float(r.inst_regret_half), format_float(r.inst_regret_1me),
               format_float(r.cum_regret_half), format_float(r.cum_regret_1me))
        out.write(",".join(row) + "\n")
    return out.getvalue()


def run_seed(cfg: ExperimentConfig, seed: int) -> list:
    """One replication of the configured algorithm."""
    exp = build_experiment(cfg, seed)
    n, k = cfg.horizon, cfg.rank
    ls = cfg.local_search
    if cfg.algorithm == "squarecb":
        return run_squarecb(exp.env, exp.oracle, exp.sched, n, k, seed=seed,
                            reg_sq=exp.reg_sq, ls_tol=float(ls["tol"]),
                            max_iters=int(ls["max_iters"]))
    if cfg.algorithm == "epsgreedy":
        return run_epsgreedy(exp.env, exp.oracle, exp.sched, n, k,
                             table=exp.builder.weight_table(), seed=seed, reg_sq=exp.reg_sq,
                             ls_tol=float(ls["tol"]), max_iters=int(ls["max_iters"]),
                             mc_draws=int(ls["mc_draws"]))
    if cfg.algorithm == "uniform-baseline":
        return run_uniform(exp.env, n, k, seed=seed)
    return run_truth_baseline(exp.env, n, k, seed=seed, ls_tol=float(ls["tol"]))


def _seed_job(args):
    cfg_dict, base_dir, seed, path = args
    cfg = ExperimentConfig.from_dict(cfg_dict, base_dir)
    t0 = time.perf_counter()
    records = run_seed(cfg, seed)
    Path(path).write_text(records_to_csv(records))
    curves = np.array([[r.cum_regret_half for r in records],
                       [r.cum_regret_1me for r in records]])
    return seed, curves, time.perf_counter() - t0


def summarize(curves_by_seed: dict, n: int) -> str:
    """Mean and std of cumulative regret at ``n/10, n/2, n`` plus log-log slopes.

    ``slope`` is fitted on the seed-averaged curve; ``median_seed_slope`` is
    the median of the per-seed fits.
    """
    stacks = np.stack([curves_by_seed[s] for s in sorted(curves_by_seed)])
    checkpoints = sorted({max(1, n // 10), max(1, n // 2), n})
    out = io.StringIO()
    out.write("regret,t,mean_cum_regret,std_cum_regret,seeds,slope,median_seed_slope\n")
    for j, (label, c) in enumerate((("half", C_HALF), ("1me", C_1ME))):
        per_seed = stacks[:, j, :]
        slope = loglog_slope(per_seed.mean(axis=0))
        med = float(np.median([loglog_slope(cv) for cv in per_seed]))
        for t in checkpoints:
            vals = per_seed[:, t - 1]
            out.write(f"{label},{t},{format_float(vals.mean())},{format_float(vals.std())},"
                      f"{len(per_seed)},{format_float(slope)},{format_float(med)}\n")
    return out.getvalue()


def cmd_run(args) -> int:
    cfg = load(args.config)
    out_dir = Path(args.output or cfg.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    workers = args.workers or cfg.workers
    jobs = [(cfg.to_dict(), cfg.base_dir, s, str(out_dir / f"{cfg.name}_seed{s}.csv"))
            for s in cfg.seeds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_seed_job, jobs))
    else:
        results = [_seed_job(j) for j in jobs]
    curves = {}
    for seed, cv, elapsed in results:
        curves[seed] = cv
        log.info("seed %d done in %.1fs", seed, elapsed)
    summary = summarize(curves, cfg.horizon)
    (out_dir / f"{cfg.name}_summary.csv").write_text(summary)
    print(summary, end="")
    return 0


def cmd_verify(args) -> int:
    names = args.battery or list(BATTERIES)
    unknown = [b for b in names if b not in BATTERIES]
    if unknown:
        print(f"unknown battery {unknown[0]!r}; choose from {sorted(BATTERIES)}",
              file=sys.stderr)
        return 2
    ok = True
    for name in names:
        rep = BATTERIES[name]()
        print(rep.line(), flush=True)
        ok &= rep.passed
    print("all batteries passed" if ok else "some batteries FAILED")
    return 0 if ok else 1


def cmd_weights(args) -> int:
    if args.kmax < 1:
        print("--kmax must be >= 1", file=sys.stderr)
        return 2
    text = compute_weights(args.kmax, args.quad_points, args.convention).to_csv()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def bench_rows(cfg: ExperimentConfig) -> list:
    """Oracle-only runs at every configured horizon for every seed."""
    horizons = cfg.bench["horizons"] or [cfg.horizon, 4 * cfg.horizon]
    rows = []
    for seed in cfg.seeds:
        for n in horizons:
            b = Builder(cfg)
            res = run_oracle_bench(b.model(cfg.model, ("model",)), b.oracle(int(n)),
                                   b.contexts(), cfg.ground_size, cfg.rank, int(n), seed,
                                   cfg.bench["sizes"], cfg.reward["law"],
                                   float(cfg.reward["noise_sd"]))
            rows.append((seed, int(n), res))
    return rows


def cmd_bench_oracle(args) -> int:
    cfg = load(args.config)
    out_dir = Path(args.output or cfg.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = bench_rows(cfg)
    with open(out_dir / f"{cfg.name}_oracle_bench.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["seed", "n", "cum_sq_error", "excess_loss", "min_eigenvalue"])
        for seed, n, res in rows:
            eig = "" if res.min_eigenvalue is None else format_float(res.min_eigenvalue)
            w.writerow([seed, n, format_float(res.cum_sq_error),
                        format_float(res.excess_loss), eig])
    horizons = sorted({n for _, n, _ in rows})
    for n in horizons:
        errs = [r.cum_sq_error for _, m, r in rows if m == n]
        print(f"n={n:<8d} median cum_sq_error={np.median(errs):.4f}")
    for lo, hi in zip(horizons, horizons[1:]):
        by_seed = {s: r.cum_sq_error for s, m, r in rows if m == lo}
        ratios = [r.cum_sq_error / by_seed[s] for s, m, r in rows if m == hi and by_seed[s] > 0]
        if ratios:
            print(f"median ratio n={hi}/n={lo}: {np.median(ratios):.3f}")
    flagged = [s for s, _, r in rows if r.min_eigenvalue is not None and r.min_eigenvalue < 1e-3]
    if flagged:
        print(f"warning: weak signal (min eigenvalue < 1e-3) for seeds {sorted(set(flagged))}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="subcb", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run seeded replications of an experiment")
    r.add_argument("config")
    r.add_argument("--workers", type=int, default=None)
    r.add_argument("--output", default=None, help="override the config's output directory")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="run brute-force verification batteries")
    v.add_argument("--battery", action="append", help=f"one of {', '.join(BATTERIES)}")
    v.set_defaults(func=cmd_verify)

    w = sub.add_parser("weights", help="dump the T-operator weight table as CSV")
    w.add_argument("--kmax", type=int, required=True)
    w.add_argument("--quad-points", type=int, default=64)
    w.add_argument("--convention", choices=CONVENTIONS, default="filmus-ward")
    w.add_argument("--out", default=None)
    w.set_defaults(func=cmd_weights)

    b = sub.add_parser("bench-oracle", help="oracle-only regression runs")
    b.add_argument("config")
    b.add_argument("--output", default=None)
    b.set_defaults(func=cmd_bench_oracle)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("SUBCB_LOG_LEVEL", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SubcbError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
