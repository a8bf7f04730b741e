"""Traffic generation: Poisson background flows plus synchronized incasts.

Background arrivals form one Poisson process whose rate is calibrated so
the expected offered bytes/second equal target_load times the aggregate
host-edge capacity, with long flows carrying long_load_fraction of the
Poisson byte budget. Incast bursts are budgeted inside the same target
load: their mean byte rate is subtracted before the background rate is
derived, so the load axis stays meaningful when bursts are enabled.

Everything is a pure function of (config, topology, seed); the generator
is the project splitmix64 stream with substreams drawn in a fixed order
(background first, then incast).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

from .rng import Splitmix64

CLASS_SHORT = "short"
CLASS_LONG = "long"
CLASS_INCAST = "incast"


@dataclass
class WorkloadConfig:
    target_load: float = 0.6
    short_size_min: int = 8_000
    short_size_max: int = 32_000
    long_size: int = 1_000_000
    long_load_fraction: float = 0.30
    incast_degree: int = 24
    incast_response_size: int = 100_000
    incast_interval: int = 10_000_000   # ns between bursts; 0 disables bursts
    incast_jitter: int = 10_000         # ns, uniform per-sender start offset
    duration: int = 100_000_000         # ns
    seed: int = 1

    def __post_init__(self):
        if not 0.0 < self.target_load < 1.0:
            raise ValueError("target_load must be in (0, 1)")
        if self.incast_degree < 2:
            raise ValueError("incast_degree must be >= 2")
        if self.short_size_min <= 0 or self.short_size_max < self.short_size_min:
            raise ValueError("bad short flow size range")


@dataclass(frozen=True)
class FlowSpec:
    flow_id: int
    src: int
    dst: int
    size: int
    start_ns: int
    cls: str


def offered_rates(cfg: WorkloadConfig, topo) -> dict:
    """Byte-rate budget split and Poisson rates implied by the config."""
    capacity = topo.n_hosts * topo.line_rate / 8          # bytes/s
    offered = cfg.target_load * capacity
    if cfg.incast_interval > 0:
        incast = cfg.incast_degree * cfg.incast_response_size * (
            1e9 / cfg.incast_interval
        )
    else:
        incast = 0.0
    background = max(0.0, offered - incast)
    long_rate = cfg.long_load_fraction * background
    short_rate = background - long_rate
    mean_short = (cfg.short_size_min + cfg.short_size_max) / 2
    return {
        "offered_bytes_per_s": offered,
        "incast_bytes_per_s": incast,
        "long_bytes_per_s": long_rate,
        "short_bytes_per_s": short_rate,
        "lam_short": short_rate / mean_short,
        "lam_long": long_rate / cfg.long_size,
    }


def _uniform_pair(rng: Splitmix64, n_hosts: int) -> tuple[int, int]:
    src = rng.randbelow(n_hosts)
    dst = rng.randbelow(n_hosts - 1)
    if dst >= src:
        dst += 1
    return src, dst


def generate_background(cfg: WorkloadConfig, topo,
                        rng: Splitmix64 | None = None) -> list[FlowSpec]:
    """Poisson short/long mix; flow ids are placeholders until assembly."""
    if rng is None:
        rng = Splitmix64(cfg.seed).spawn()
    rates = offered_rates(cfg, topo)
    lam = rates["lam_short"] + rates["lam_long"]
    if lam <= 0.0:
        return []
    p_long = rates["lam_long"] / lam
    flows = []
    t = 0.0
    duration = cfg.duration
    while True:
        t += -math.log(1.0 - rng.random()) / lam * 1e9
        start = int(t)
        if start >= duration:
            break
        src, dst = _uniform_pair(rng, topo.n_hosts)
        if rng.random() < p_long:
            size, cls = cfg.long_size, CLASS_LONG
        else:
            size = rng.uniform_int(cfg.short_size_min, cfg.short_size_max)
            cls = CLASS_SHORT
        flows.append(FlowSpec(-1, src, dst, size, start, cls))
    return flows


def generate_incast(cfg: WorkloadConfig, topo,
                    rng: Splitmix64 | None = None) -> list[list[FlowSpec]]:
    """Burst groups: one aggregator and incast_degree distinct responders
    per epoch, each responder jittered uniformly within the burst."""
    n_hosts = topo.n_hosts
    if cfg.incast_degree > n_hosts - 1:
        raise ValueError(
            f"incast_degree {cfg.incast_degree} exceeds host count "
            f"{n_hosts} minus one"
        )
    if cfg.incast_interval <= 0:
        return []
    if rng is None:
        throwaway = Splitmix64(cfg.seed)
        throwaway.spawn()
        rng = throwaway.spawn()
    groups = []
    epoch = cfg.incast_interval
    while epoch < cfg.duration:
        aggregator = rng.randbelow(n_hosts)
        pool = [h for h in range(n_hosts) if h != aggregator]
        for i in range(cfg.incast_degree):
            j = i + rng.randbelow(len(pool) - i)
            pool[i], pool[j] = pool[j], pool[i]
        group = []
        for responder in pool[:cfg.incast_degree]:
            start = epoch + rng.randbelow(cfg.incast_jitter + 1)
            group.append(FlowSpec(-1, responder, aggregator,
                                  cfg.incast_response_size, start,
                                  CLASS_INCAST))
        groups.append(group)
        epoch += cfg.incast_interval
    return groups


def generate_workload(cfg: WorkloadConfig, topo) -> list[FlowSpec]:
    """Background plus incast merged by start time, flow ids assigned."""
    master = Splitmix64(cfg.seed)
    rng_bg = master.spawn()
    rng_in = master.spawn()
    flows = generate_background(cfg, topo, rng_bg)
    for group in generate_incast(cfg, topo, rng_in):
        flows.extend(group)
    flows.sort(key=lambda f: f.start_ns)
    return [
        FlowSpec(i, f.src, f.dst, f.size, f.start_ns, f.cls)
        for i, f in enumerate(flows)
    ]


def flows_to_csv(flows: list[FlowSpec], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["flow_id", "src", "dst", "size", "start_ns", "class"])
        for f in flows:
            writer.writerow([f.flow_id, f.src, f.dst, f.size, f.start_ns,
                             f.cls])


def flows_from_csv(path) -> list[FlowSpec]:
    flows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            flows.append(FlowSpec(
                int(row["flow_id"]), int(row["src"]), int(row["dst"]),
                int(row["size"]), int(row["start_ns"]), row["class"],
            ))
    return flows
