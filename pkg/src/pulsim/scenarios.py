"""Scripted scenarios: deterministic single-episode experiments.

The reaction-latency scenario pits one long flow against a synchronized
incast converging on the same leaf down-port, with the victim port's queue
sampled and the long-flow sender's window traced. Running it once per
scheme with the same script exposes how quickly each controller backs off
and how high the victim queue climbs.
"""

from __future__ import annotations

from dataclasses import dataclass

from .config import ExperimentConfig
from .engine import METRICS_SAMPLE
from .metrics import start_port_sampling
from .simulation import Simulation
from .workload import CLASS_INCAST, CLASS_LONG, FlowSpec


def desk_config(duration: int) -> ExperimentConfig:
    cfg = ExperimentConfig()
    cfg.topology.n_leaves = 4
    cfg.topology.hosts_per_leaf = 8
    cfg.topology.n_spines = 4
    # The scripted scenario isolates reaction latency, so the instantaneous
    # ECN threshold is set deep and the buffer generous: shallow thresholds
    # would themselves cap the buildup for both schemes, and the first-RTT
    # arrival transient (degree x init window, ~240 KB) lands before any
    # feedback can act. With headroom, what separates the schemes is how
    # fast each one shuts the episode down.
    cfg.topology.buffer_bytes = 1_000_000
    cfg.topology.ecn_threshold_k = 250_000
    cfg.workload.incast_degree = 16
    cfg.run.duration = duration
    cfg.validate()
    return cfg


@dataclass
class IncastReactionResult:
    scheme: str
    onset_ns: int
    pre_incast_cwnd: int
    cwnd_trace: list            # (time_ns, cwnd_bytes, braked)
    qlen_trace: list            # (time_ns, qlen_bytes)
    peak_qlen: int
    victim_drops: int
    onset_deq_index: int        # dequeue count at incast onset
    first_ein_deq_index: int    # dequeue count at the first EIN mark, -1 if none
    brake_time_ns: int          # first time cwnd hit cwnd_safe via brake, -1
    victim_finish_ns: int       # last incast flow completion, -1 if censored

    @property
    def ein_dequeues_after_onset(self) -> int:
        if self.first_ein_deq_index < 0:
            return -1
        return self.first_ein_deq_index - self.onset_deq_index

    def first_drop_below(self, fraction: float) -> int:
        """First post-onset time cwnd fell below fraction * pre-incast value."""
        bound = fraction * self.pre_incast_cwnd
        for t, cwnd, _ in self.cwnd_trace:
            if t > self.onset_ns and cwnd < bound:
                return t
        return -1


def run_incast_reaction(scheme: str, onset_ns: int = 15_000_000,
                        tail_ns: int = 10_000_000, degree: int = 16,
                        response_size: int = 100_000,
                        seed: int = 1) -> IncastReactionResult:
    """One long flow host8 -> host0 plus `degree` simultaneous responders
    into host0; same flow script for every scheme."""
    duration = onset_ns + tail_ns
    cfg = desk_config(duration)
    cfg.workload.incast_degree = degree

    long_flow = FlowSpec(0, 8, 0, 1 << 40, 0, CLASS_LONG)
    responders = [
        FlowSpec(1 + i, 9 + i, 0, response_size, onset_ns, CLASS_INCAST)
        for i in range(degree)
    ]
    flows = [long_flow] + responders

    sim = Simulation(cfg, scheme=scheme, seed=seed, flows=flows,
                     trace_flow_ids=[0])
    victim = sim.topo.port_by_id("leaf0->host0")
    start_port_sampling(sim.engine, victim, 1_000, duration, sim.log)

    onset_state = {}

    def note_onset(_payload=None):
        onset_state["deq_index"] = victim.deq_pkts
        victim.first_ein_deq_index = -1   # count detections from onset only
        victim.max_qlen = victim.qlen     # peak measured from onset

    sim.engine.schedule(onset_ns, METRICS_SAMPLE, note_onset)
    log = sim.run()

    trace = log.cwnd_traces[0]
    pre = 0
    for t, cwnd, _ in trace:
        if t > onset_ns:
            break
        pre = cwnd
    brake_time = -1
    safe = sim.params.cwnd_safe_mss * sim.params.mss
    for t, cwnd, braked in trace:
        if t >= onset_ns and braked and cwnd == safe:
            brake_time = t
            break
    finishes = [fin for fid, cls, _, _, fin in log.fct_samples
                if cls == CLASS_INCAST]
    return IncastReactionResult(
        scheme=scheme,
        onset_ns=onset_ns,
        pre_incast_cwnd=pre,
        cwnd_trace=trace,
        qlen_trace=log.port_traces[victim.port_id],
        peak_qlen=victim.max_qlen,
        victim_drops=victim.drop_pkts,
        onset_deq_index=onset_state.get("deq_index", 0),
        first_ein_deq_index=victim.first_ein_deq_index,
        brake_time_ns=brake_time,
        victim_finish_ns=max(finishes) if len(finishes) == degree else -1,
    )
