"""Experiment configuration: flat `section.key = value` files with defaults.

Defaults reproduce the reference setup: 400 hosts as 20 leaves x 20 hosts
with 10 spines (2:1 oversubscription), 10 Gb/s links with 10 us delay,
detector window of 50 samples at a quarter of line rate, safe window of
4 MSS, and the pulser controller. Every key is overridable; unknown keys
are hard errors with file:line diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .fabric import PortConfig
from .transport import SCHEME_DCTCP, SCHEME_PULSER, TransportParams
from .workload import WorkloadConfig


class ConfigError(Exception):
    """Bad configuration input; message carries location context."""


@dataclass
class TopologyConfig:
    n_leaves: int = 20
    hosts_per_leaf: int = 20
    n_spines: int = 10
    line_rate: int = 10_000_000_000     # bits/s
    link_delay: int = 10_000            # ns per hop
    buffer_bytes: int = 250_000
    ecn_threshold_k: int = 0            # 0 -> 65 MSS, scaled with line rate
    high_water_mark: int = 0            # 0 -> 1.5 x K
    ein_window_n: int = 50
    ein_threshold_fraction: float = 0.25


@dataclass
class TransportConfig:
    cc: str = SCHEME_PULSER
    mss: int = 1460
    cwnd_safe_mss: int = 4
    g: float = 1.0 / 16.0
    init_cwnd_mss: int = 10
    rto_initial: int = 1_000_000        # ns
    rto_min: int = 200_000              # ns
    rto_max: int = 100_000_000          # ns


@dataclass
class WorkloadKnobs:
    target_load: float = 0.6
    short_size_min: int = 8_000
    short_size_max: int = 32_000
    long_size: int = 1_000_000
    long_load_fraction: float = 0.30
    incast_degree: int = 24
    incast_response_size: int = 100_000
    incast_interval: int = 10_000_000   # ns; 0 disables bursts
    incast_jitter: int = 10_000         # ns


@dataclass
class RunConfig:
    duration: int = 100_000_000         # ns
    seeds: tuple = (1,)
    sample_ports: tuple = ()
    sample_period: int = 10_000         # ns
    cwnd_trace_flows: int = 0           # trace the first N long flows
    out_dir: str = "out"


@dataclass
class ExperimentConfig:
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    workload: WorkloadKnobs = field(default_factory=WorkloadKnobs)
    transport: TransportConfig = field(default_factory=TransportConfig)
    run: RunConfig = field(default_factory=RunConfig)

    def resolved_k(self) -> int:
        if self.topology.ecn_threshold_k > 0:
            return self.topology.ecn_threshold_k
        scale = self.topology.line_rate / 10_000_000_000
        return int(65 * self.transport.mss * scale)

    def resolved_high_water(self) -> int:
        if self.topology.high_water_mark > 0:
            return self.topology.high_water_mark
        return int(1.5 * self.resolved_k())

    def port_config(self) -> PortConfig:
        t = self.topology
        return PortConfig(
            line_rate=t.line_rate,
            ecn_threshold_k=self.resolved_k(),
            buffer_capacity=t.buffer_bytes,
            ein_window_n=t.ein_window_n,
            ein_threshold=t.ein_threshold_fraction * t.line_rate / 8,
            high_water_mark=self.resolved_high_water(),
        )

    def workload_config(self, seed: int, load: float | None = None) -> WorkloadConfig:
        w = self.workload
        return WorkloadConfig(
            target_load=w.target_load if load is None else load,
            short_size_min=w.short_size_min,
            short_size_max=w.short_size_max,
            long_size=w.long_size,
            long_load_fraction=w.long_load_fraction,
            incast_degree=w.incast_degree,
            incast_response_size=w.incast_response_size,
            incast_interval=w.incast_interval,
            incast_jitter=w.incast_jitter,
            duration=self.run.duration,
            seed=seed,
        )

    def transport_params(self) -> TransportParams:
        t = self.transport
        return TransportParams(
            mss=t.mss, init_cwnd_mss=t.init_cwnd_mss,
            cwnd_safe_mss=t.cwnd_safe_mss, g=t.g,
            rto_initial=t.rto_initial, rto_min=t.rto_min, rto_max=t.rto_max,
        )

    def validate(self) -> None:
        t = self.topology
        n_hosts = t.n_leaves * t.hosts_per_leaf
        if self.workload.incast_degree > n_hosts - 1:
            raise ConfigError(
                f"workload.incast_degree = {self.workload.incast_degree} "
                f"exceeds host count {n_hosts} minus one"
            )
        if self.resolved_high_water() <= self.resolved_k():
            raise ConfigError(
                f"topology.high_water_mark ({self.resolved_high_water()}) "
                f"must exceed the ECN threshold ({self.resolved_k()})"
            )
        if self.resolved_k() >= t.buffer_bytes:
            raise ConfigError(
                "topology.buffer_bytes must exceed the ECN threshold"
            )


def _conv_int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        value = float(text)
        if value != int(value):
            raise ValueError(f"{text!r} is not an integer")
        return int(value)


def _conv_float(text: str) -> float:
    return float(text)


def _conv_str(text: str) -> str:
    return text


def parse_seed_list(text: str) -> tuple:
    """Seeds as a comma list ('1,2,3') or an inclusive range ('1..5')."""
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(part) for part in text.split(",") if part.strip())


def _conv_ports(text: str) -> tuple:
    return tuple(part.strip() for part in text.split(",") if part.strip())


def _positive(v):
    return None if v > 0 else "must be positive"


def _non_negative(v):
    return None if v >= 0 else "must be >= 0"


def _open_fraction(v):
    return None if 0.0 < v < 1.0 else "must be strictly between 0 and 1"


def _closed_fraction(v):
    return None if 0.0 < v <= 1.0 else "must be in (0, 1]"


def _scheme_name(v):
    if v in (SCHEME_DCTCP, SCHEME_PULSER):
        return None
    return f"must be one of: {SCHEME_DCTCP}, {SCHEME_PULSER}"


def _at_least(n):
    return lambda v: None if v >= n else f"must be >= {n}"


def _no_check(v):
    return None


# key -> (section attr, field, converter, range check)
_SCHEMA = {
    "topology.n_leaves": ("topology", "n_leaves", _conv_int, _at_least(1)),
    "topology.hosts_per_leaf": ("topology", "hosts_per_leaf", _conv_int, _at_least(1)),
    "topology.n_spines": ("topology", "n_spines", _conv_int, _at_least(1)),
    "topology.line_rate": ("topology", "line_rate", _conv_int, _positive),
    "topology.link_delay": ("topology", "link_delay", _conv_int, _positive),
    "topology.buffer_bytes": ("topology", "buffer_bytes", _conv_int, _positive),
    "topology.ecn_threshold_k": ("topology", "ecn_threshold_k", _conv_int, _non_negative),
    "topology.high_water_mark": ("topology", "high_water_mark", _conv_int, _non_negative),
    "topology.ein_window_n": ("topology", "ein_window_n", _conv_int, _at_least(1)),
    "topology.ein_threshold_fraction": ("topology", "ein_threshold_fraction", _conv_float, _closed_fraction),
    "workload.target_load": ("workload", "target_load", _conv_float, _open_fraction),
    "workload.short_size_min": ("workload", "short_size_min", _conv_int, _positive),
    "workload.short_size_max": ("workload", "short_size_max", _conv_int, _positive),
    "workload.long_size": ("workload", "long_size", _conv_int, _positive),
    "workload.long_load_fraction": ("workload", "long_load_fraction", _conv_float, _open_fraction),
    "workload.incast_degree": ("workload", "incast_degree", _conv_int, _at_least(2)),
    "workload.incast_response_size": ("workload", "incast_response_size", _conv_int, _positive),
    "workload.incast_interval": ("workload", "incast_interval", _conv_int, _non_negative),
    "workload.incast_jitter": ("workload", "incast_jitter", _conv_int, _non_negative),
    "transport.cc": ("transport", "cc", _conv_str, _scheme_name),
    "transport.mss": ("transport", "mss", _conv_int, _positive),
    "transport.cwnd_safe_mss": ("transport", "cwnd_safe_mss", _conv_int, _at_least(1)),
    "transport.g": ("transport", "g", _conv_float, _closed_fraction),
    "transport.init_cwnd_mss": ("transport", "init_cwnd_mss", _conv_int, _at_least(1)),
    "transport.rto_initial": ("transport", "rto_initial", _conv_int, _positive),
    "transport.rto_min": ("transport", "rto_min", _conv_int, _positive),
    "transport.rto_max": ("transport", "rto_max", _conv_int, _positive),
    "run.duration": ("run", "duration", _conv_int, _positive),
    "run.seeds": ("run", "seeds", parse_seed_list, _no_check),
    "run.sample_ports": ("run", "sample_ports", _conv_ports, _no_check),
    "run.sample_period": ("run", "sample_period", _conv_int, _positive),
    "run.cwnd_trace_flows": ("run", "cwnd_trace_flows", _conv_int, _non_negative),
    "run.out_dir": ("run", "out_dir", _conv_str, _no_check),
}


def apply_setting(cfg: ExperimentConfig, key: str, value: str,
                  where: str) -> None:
    spec = _SCHEMA.get(key)
    if spec is None:
        raise ConfigError(f"{where}: unknown key {key!r}")
    section, fieldname, conv, check = spec
    try:
        converted = conv(value)
    except ValueError as exc:
        raise ConfigError(f"{where}: bad value for {key}: {exc}") from None
    problem = check(converted)
    if problem is not None:
        raise ConfigError(f"{where}: {key} = {value}: {problem}")
    setattr(getattr(cfg, section), fieldname, converted)


def load_config(path) -> ExperimentConfig:
    cfg = ExperimentConfig()
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected `section.key = "
                              f"value`, got {raw.strip()!r}")
        key, _, value = line.partition("=")
        apply_setting(cfg, key.strip(), value.strip(), f"{path}:{lineno}")
    cfg.validate()
    return cfg


def apply_overrides(cfg: ExperimentConfig, overrides) -> None:
    """Apply CLI `--set section.key=value` pairs, then re-validate."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set {item!r}: expected section.key=value")
        key, _, value = item.partition("=")
        apply_setting(cfg, key.strip(), value.strip(), f"--set {key.strip()}")
    cfg.validate()
