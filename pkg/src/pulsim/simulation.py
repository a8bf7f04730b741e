"""One simulation run: fabric + connections + workload + metrics, wired.

A run is a pure function of (config, scheme, load, seed, flow list): two
runs with identical inputs replay the same event sequence and emit
byte-identical CSVs.
"""

from __future__ import annotations

from .config import ExperimentConfig
from .engine import FLOW_START, Engine
from .fabric import attach_fabric_handlers, build_leaf_spine
from .metrics import MetricsLog, attach_metrics_handlers, start_port_sampling
from .transport import Connection, attach_transport_handlers
from .workload import CLASS_LONG, FlowSpec, generate_workload


class Simulation:
    def __init__(self, cfg: ExperimentConfig, scheme: str | None = None,
                 load: float | None = None, seed: int | None = None,
                 flows: list[FlowSpec] | None = None,
                 trace_flow_ids=None):
        self.cfg = cfg
        self.scheme = scheme if scheme is not None else cfg.transport.cc
        self.seed = seed if seed is not None else cfg.run.seeds[0]
        self.load = load if load is not None else cfg.workload.target_load
        self.duration = cfg.run.duration

        engine = Engine()
        attach_fabric_handlers(engine)
        attach_transport_handlers(engine)
        attach_metrics_handlers(engine)
        engine.register(FLOW_START, self._on_flow_start)
        self.engine = engine

        t = cfg.topology
        self.topo = build_leaf_spine(
            t.n_leaves, t.hosts_per_leaf, t.n_spines, t.line_rate,
            t.link_delay, engine, cfg.port_config(),
        )
        self.params = cfg.transport_params()

        if flows is None:
            flows = generate_workload(
                cfg.workload_config(self.seed, self.load), self.topo
            )
        self.flows = flows
        self.log = MetricsLog()
        self.conns: dict[int, Connection] = {}

        if trace_flow_ids is None:
            trace_flow_ids = [
                f.flow_id for f in flows if f.cls == CLASS_LONG
            ][: cfg.run.cwnd_trace_flows]
        self._trace_ids = frozenset(trace_flow_ids)

        for flow in flows:
            engine.schedule(flow.start_ns, FLOW_START, flow)
        for port_id in cfg.run.sample_ports:
            start_port_sampling(
                engine, self.topo.port_by_id(port_id),
                cfg.run.sample_period, self.duration, self.log,
            )

    def _on_flow_start(self, flow: FlowSpec) -> None:
        trace = None
        if flow.flow_id in self._trace_ids:
            trace = self.log.cwnd_traces.setdefault(flow.flow_id, [])
        conn = Connection(
            flow.flow_id, flow.size,
            self.topo.route(flow.src, flow.dst, flow.flow_id),
            self.topo.route(flow.dst, flow.src, flow.flow_id),
            self.engine, self.params, self.scheme,
            on_complete=lambda _conn, now, f=flow: self.log.record_completion(f, now),
            trace=trace,
        )
        self.conns[flow.flow_id] = conn
        self.log.flows_started += 1
        conn.start(self.engine.now)

    def run(self) -> MetricsLog:
        self.engine.run_until(self.duration)
        self.log.finalize(self.topo, self.duration)
        return self.log

    def run_to_quiescence(self, limit_ns: int = 1 << 50) -> MetricsLog:
        """Drain every pending event (all flows finish); for invariants."""
        self.engine.run_until(limit_ns)
        assert self.engine.pending_count == 0, "simulation did not quiesce"
        self.log.finalize(self.topo, self.duration)
        return self.log
