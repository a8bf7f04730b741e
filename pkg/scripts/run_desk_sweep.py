#!/usr/bin/env python3
"""Small desk-scale scheme x load sweep; writes per-run CSVs plus the
aggregated summary under --out."""

import argparse
import os

from pulsim.cli import run_sweep
from pulsim.config import ExperimentConfig


def desk_config():
    cfg = ExperimentConfig()
    cfg.topology.n_leaves = 4
    cfg.topology.hosts_per_leaf = 8
    cfg.topology.n_spines = 4
    cfg.workload.incast_degree = 16
    cfg.workload.incast_interval = 5_000_000
    cfg.workload.incast_response_size = 100_000
    cfg.run.duration = 20_000_000
    cfg.run.sample_ports = ("leaf0->host0",)
    cfg.run.cwnd_trace_flows = 1
    cfg.validate()
    return cfg


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="out/desk")
    parser.add_argument("--loads", default="0.2,0.4,0.6")
    parser.add_argument("--seeds", default="1,2,3")
    parser.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    args = parser.parse_args()

    loads = [float(x) for x in args.loads.split(",")]
    seeds = [int(x) for x in args.seeds.split(",")]
    rows = run_sweep(desk_config(), ["dctcp", "pulser"], loads, seeds,
                     args.out, jobs=args.jobs)
    for row in rows:
        print(f"{row['scheme']:7s} load={row['load']}: "
              f"median={row['median_fct_ns'] / 1e3:.0f}us "
              f"p99={row['p99_fct_ns'] / 1e6:.2f}ms "
              f"tput={float(row['mean_long_tput_bps']) / 1e9:.2f}Gb/s")


if __name__ == "__main__":
    main()
