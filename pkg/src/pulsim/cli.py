"""Command-line entry point: single runs and scheme x load x seed sweeps.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.

Sweep layout under --out:

  <scheme>_load<L>_seed<S>/   fct.csv throughput.csv qlen.csv cwnd.csv
                              summary.csv            (one row, this run)
  summary.csv                 one row per (scheme, load): the median across
                              seeds of every per-seed statistic

The aggregated summary is recomputed by re-reading the stored per-seed
summary.csv files, so replaying aggregation from the run directories
reproduces it exactly.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from .config import ConfigError, apply_overrides, load_config, parse_seed_list
from .metrics import SUMMARY_COLUMNS, percentile, write_all, write_summary_csv
from .simulation import Simulation

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def run_one(cfg, scheme, load, seed, out_dir):
    """Execute one simulation and write its CSV set; returns the summary row."""
    sim = Simulation(cfg, scheme=scheme, load=load, seed=seed)
    log = sim.run()
    return write_all(log, scheme, load, out_dir)


def _sweep_worker(args):
    cfg, scheme, load, seed, out_dir = args
    try:
        run_one(cfg, scheme, load, seed, out_dir)
        return None
    except Exception as exc:  # surfaced with the failing triple by the parent
        return f"(scheme={scheme}, load={load}, seed={seed}): {exc!r}"


def run_dir_name(scheme, load, seed):
    return f"{scheme}_load{load}_seed{seed}"


def read_summary_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def aggregate_run_dirs(out_dir, schemes, loads, seeds):
    """Median-across-seeds per (scheme, load), replayed from stored CSVs."""
    rows = []
    for scheme in schemes:
        for load in loads:
            per_seed = []
            for seed in seeds:
                path = os.path.join(out_dir, run_dir_name(scheme, load, seed),
                                    "summary.csv")
                per_seed.extend(read_summary_rows(path))
            agg = {"scheme": scheme, "load": load}
            for col in SUMMARY_COLUMNS[2:]:
                values = [float(r[col]) for r in per_seed]
                med = percentile(values, 0.5)
                agg[col] = int(med) if med == int(med) and col != \
                    "mean_long_tput_bps" else med
            rows.append(agg)
    return rows


def run_sweep(cfg, schemes, loads, seeds, out_dir, jobs=1):
    os.makedirs(out_dir, exist_ok=True)
    tasks = [
        (cfg, scheme, load, seed,
         os.path.join(out_dir, run_dir_name(scheme, load, seed)))
        for scheme in schemes for load in loads for seed in seeds
    ]
    failures = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for result in pool.map(_sweep_worker, tasks):
                if result is not None:
                    failures.append(result)
    else:
        for task in tasks:
            result = _sweep_worker(task)
            if result is not None:
                failures.append(result)
    if failures:
        raise RuntimeError("sweep failed at " + "; ".join(failures))
    rows = aggregate_run_dirs(out_dir, schemes, loads, seeds)
    write_summary_csv(rows, os.path.join(out_dir, "summary.csv"))
    return rows


def _load_cfg(args):
    cfg = load_config(args.config)
    apply_overrides(cfg, args.set or [])
    return cfg


def _cmd_simulate(args):
    cfg = _load_cfg(args)
    out_dir = args.out or cfg.run.out_dir
    scheme = cfg.transport.cc
    load = cfg.workload.target_load
    seed = cfg.run.seeds[0]
    row = run_one(cfg, scheme, load, seed, out_dir)
    print(f"{scheme} load={load} seed={seed}: "
          f"median_fct={row['median_fct_ns']}ns "
          f"p99_fct={row['p99_fct_ns']}ns "
          f"long_tput={row['mean_long_tput_bps']:.3e}bps "
          f"drops={row['drops']} ein={row['ein_marks']} ce={row['ce_marks']}")
    return EXIT_OK


def _cmd_sweep(args):
    cfg = _load_cfg(args)
    schemes = [s.strip() for s in args.schemes.split(",") if s.strip()]
    for scheme in schemes:
        if scheme not in ("dctcp", "pulser"):
            raise ConfigError(
                f"--schemes: unknown scheme {scheme!r} "
                "(must be one of: dctcp, pulser)"
            )
    loads = [float(x) for x in args.loads.split(",") if x.strip()]
    seeds = list(parse_seed_list(args.seeds)) if args.seeds \
        else list(cfg.run.seeds)
    out_dir = args.out or cfg.run.out_dir
    rows = run_sweep(cfg, schemes, loads, seeds, out_dir, jobs=args.jobs)
    for row in rows:
        print(f"{row['scheme']} load={row['load']}: "
              f"p99_fct={row['p99_fct_ns']}ns "
              f"long_tput={float(row['mean_long_tput_bps']):.3e}bps")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pulsim",
        description="Packet-level leaf-spine simulator comparing dctcp "
                    "and pulser congestion control",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one simulation")
    sim.add_argument("--config", required=True)
    sim.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE")
    sim.add_argument("--out", default=None)
    sim.set_defaults(func=_cmd_simulate)

    sweep = sub.add_parser("sweep", help="scheme x load x seed sweep")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE")
    sweep.add_argument("--schemes", default="dctcp,pulser")
    sweep.add_argument("--loads", default="0.6")
    sweep.add_argument("--seeds", default=None, help="e.g. 1,2,3 or 1..5")
    sweep.add_argument("--out", default=None)
    sweep.add_argument("--jobs", type=int, default=1,
                       help="parallel simulations (results are per-run "
                            "deterministic either way)")
    sweep.set_defaults(func=_cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
