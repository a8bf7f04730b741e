"""Run statistics: FCT samples, throughput, traces, and the CSV contract.

CSV column contract (consumed by the plotting frontend, bit-exact):

  fct.csv         flow_id,class,size_bytes,start_ns,finish_ns,fct_ns
  throughput.csv  flow_id,bits_per_second            (completed long flows)
  qlen.csv        port_id,time_ns,qlen_bytes
  cwnd.csv        conn_id,time_ns,cwnd_bytes,braked
  summary.csv     scheme,load,median_fct_ns,p99_fct_ns,mean_long_tput_bps,
                  drops,ein_marks,ce_marks

Summary statistics are computed over short-class flows (FCT) and
long-class flows (throughput), excluding flows that start inside the
warm-up window (first 5% of the run) and flows still incomplete at run
end; incompletes are tallied separately so censoring stays visible.
"""

from __future__ import annotations

import csv
import math

from .engine import METRICS_SAMPLE, Engine
from .workload import CLASS_LONG, CLASS_SHORT

WARMUP_FRACTION = 0.05


def percentile(samples, p: float):
    """Nearest-rank percentile: sorted value at 1-based index ceil(p*n)."""
    if not samples:
        raise ValueError("percentile of an empty sample list")
    if not 0.0 < p <= 1.0:
        raise ValueError(f"percentile fraction must be in (0, 1], got {p}")
    ordered = sorted(samples)
    return ordered[math.ceil(p * len(ordered)) - 1]


class MetricsLog:
    """Everything one simulation run reports."""

    def __init__(self):
        self.fct_samples = []       # (flow_id, cls, size, start_ns, finish_ns)
        self.port_traces = {}       # port_id -> [(time_ns, qlen_bytes)]
        self.cwnd_traces = {}       # conn_id -> [(time_ns, cwnd, braked)]
        self.port_counters = {}     # port_id -> (drops, ce_marks, ein_marks)
        self.flows_started = 0
        self.incomplete = 0
        self.drops = 0
        self.ein_marks = 0
        self.ce_marks = 0
        self.duration = 0

    def record_completion(self, flow, finish_ns: int) -> None:
        self.fct_samples.append(
            (flow.flow_id, flow.cls, flow.size, flow.start_ns, finish_ns)
        )

    def finalize(self, topo, duration: int) -> None:
        self.duration = duration
        self.incomplete = self.flows_started - len(self.fct_samples)
        for port in topo.all_ports():
            if port.drop_pkts or port.ce_marks or port.ein_marks:
                self.port_counters[port.port_id] = (
                    port.drop_pkts, port.ce_marks, port.ein_marks
                )
            self.drops += port.drop_pkts
            self.ein_marks += port.ein_marks
            self.ce_marks += port.ce_marks

    def completed(self, cls=None, after_ns: int = 0):
        for row in self.fct_samples:
            if row[3] >= after_ns and (cls is None or row[1] == cls):
                yield row


def long_flow_throughput(log: MetricsLog, after_ns: int = 0) -> float:
    """Mean per-flow goodput (bits/s) over completed long flows."""
    rates = [
        size * 8 * 1_000_000_000 / (finish - start)
        for _, _, size, start, finish in log.completed(CLASS_LONG, after_ns)
    ]
    if not rates:
        raise ValueError("no completed long flows to average")
    return sum(rates) / len(rates)


def start_port_sampling(engine: Engine, port, period: int, until: int,
                        log: MetricsLog) -> None:
    """Record (time, qlen) for the port every `period` ns in [0, until)."""
    trace = log.port_traces.setdefault(port.port_id, [])

    def sample(_payload=None):
        trace.append((engine.now, port.qlen))
        nxt = engine.now + period
        if nxt < until:
            engine.schedule(nxt, METRICS_SAMPLE, sample)

    engine.schedule(engine.now, METRICS_SAMPLE, sample)


def attach_metrics_handlers(engine: Engine) -> None:
    engine.register(METRICS_SAMPLE, lambda closure: closure())


def summarize(log: MetricsLog, scheme: str, load: float) -> dict:
    """One summary row for a finished run (warm-up excluded)."""
    warmup = int(log.duration * WARMUP_FRACTION)
    short_fcts = [
        finish - start
        for _, _, _, start, finish in log.completed(CLASS_SHORT, warmup)
    ]
    if short_fcts:
        median_fct = percentile(short_fcts, 0.5)
        p99_fct = percentile(short_fcts, 0.99)
    else:
        median_fct = p99_fct = 0
    try:
        tput = long_flow_throughput(log, warmup)
    except ValueError:
        tput = 0.0
    return {
        "scheme": scheme,
        "load": load,
        "median_fct_ns": median_fct,
        "p99_fct_ns": p99_fct,
        "mean_long_tput_bps": tput,
        "drops": log.drops,
        "ein_marks": log.ein_marks,
        "ce_marks": log.ce_marks,
    }


SUMMARY_COLUMNS = ["scheme", "load", "median_fct_ns", "p99_fct_ns",
                   "mean_long_tput_bps", "drops", "ein_marks", "ce_marks"]


def write_fct_csv(log: MetricsLog, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["flow_id", "class", "size_bytes", "start_ns",
                         "finish_ns", "fct_ns"])
        for flow_id, cls, size, start, finish in log.fct_samples:
            writer.writerow([flow_id, cls, size, start, finish,
                             finish - start])


def write_throughput_csv(log: MetricsLog, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["flow_id", "bits_per_second"])
        for flow_id, _, size, start, finish in log.completed(CLASS_LONG):
            writer.writerow(
                [flow_id, repr(size * 8 * 1_000_000_000 / (finish - start))]
            )


def write_qlen_csv(log: MetricsLog, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["port_id", "time_ns", "qlen_bytes"])
        for port_id in sorted(log.port_traces):
            for t, qlen in log.port_traces[port_id]:
                writer.writerow([port_id, t, qlen])


def write_cwnd_csv(log: MetricsLog, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["conn_id", "time_ns", "cwnd_bytes", "braked"])
        for conn_id in sorted(log.cwnd_traces):
            for t, cwnd, braked in log.cwnd_traces[conn_id]:
                writer.writerow([conn_id, t, cwnd, int(braked)])


def write_summary_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for row in rows:
            writer.writerow([
                row["scheme"], row["load"], row["median_fct_ns"],
                row["p99_fct_ns"], repr(float(row["mean_long_tput_bps"])),
                row["drops"], row["ein_marks"], row["ce_marks"],
            ])


def write_all(log: MetricsLog, scheme: str, load: float, out_dir) -> dict:
    """Write the per-run CSV set; returns the summary row."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    write_fct_csv(log, os.path.join(out_dir, "fct.csv"))
    write_throughput_csv(log, os.path.join(out_dir, "throughput.csv"))
    write_qlen_csv(log, os.path.join(out_dir, "qlen.csv"))
    write_cwnd_csv(log, os.path.join(out_dir, "cwnd.csv"))
    row = summarize(log, scheme, load)
    write_summary_csv([row], os.path.join(out_dir, "summary.csv"))
    return row
