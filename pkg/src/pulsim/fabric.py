"""Leaf-spine fabric: output-queued switch ports, tail-drop buffers, ECN
threshold marking, and the gradient-based incast detector.

A port samples the queue-length gradient at every dequeue (data and ACK
alike) and marks departing *data* packets when the sliding-window average
gradient exceeds the configured fraction of line rate, with an absolute
high-water-mark clause acting as hysteresis while a detection episode is
live. ECN stays memoryless: CE depends only on the instantaneous queue
versus the threshold K.

Gradients are integer bytes/second via floor division (exact window sums,
no float drift); time is integer nanoseconds throughout.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .engine import PACKET_ARRIVAL, SERVICE_COMPLETION, Engine
from .rng import mix64

HEADER_BYTES = 40
_NS_PER_S = 1_000_000_000


class Packet:
    """One simulated segment or ACK.

    Data packets carry (ecn_capable, ce_mark, ein_mark); ACKs carry the
    echo flags plus the cumulative ack number and the data packet's send
    timestamp (the RTT sample source). route is the ordered tuple of ports
    still ahead of the packet; hop indexes the next one.
    """

    __slots__ = (
        "flow_id", "conn", "route", "hop", "seq_lo", "seq_hi", "size",
        "is_ack", "ecn_capable", "ce_mark", "ein_mark",
        "ecn_echo", "ein_echo", "ack_no", "send_time", "echo_send_time",
    )

    def __init__(self, flow_id, conn, route, seq_lo, seq_hi, size, is_ack,
                 send_time, ecn_capable=False, ecn_echo=False, ein_echo=False,
                 ack_no=0, echo_send_time=0):
        self.flow_id = flow_id
        self.conn = conn
        self.route = route
        self.hop = 0
        self.seq_lo = seq_lo
        self.seq_hi = seq_hi
        self.size = size
        self.is_ack = is_ack
        self.ecn_capable = ecn_capable
        self.ce_mark = False
        self.ein_mark = False
        self.ecn_echo = ecn_echo
        self.ein_echo = ein_echo
        self.ack_no = ack_no
        self.send_time = send_time
        self.echo_send_time = echo_send_time


@dataclass
class PortConfig:
    line_rate: int              # bits/second
    ecn_threshold_k: int        # bytes
    buffer_capacity: int        # bytes
    ein_window_n: int = 50
    ein_threshold: float = 0.0  # bytes/second; 0 -> 0.25 * line_rate / 8
    high_water_mark: int = 0    # bytes; 0 -> 1.5 * K

    def __post_init__(self):
        if self.ein_threshold == 0.0:
            self.ein_threshold = 0.25 * self.line_rate / 8
        if self.high_water_mark == 0:
            self.high_water_mark = int(1.5 * self.ecn_threshold_k)
        if self.high_water_mark <= self.ecn_threshold_k:
            raise ValueError(
                f"high_water_mark ({self.high_water_mark}) must exceed "
                f"ecn_threshold_k ({self.ecn_threshold_k})"
            )


def compute_gradient(qlen: int, qlen_prev: int, t: int, t_prev: int) -> int:
    """Signed queue growth rate in bytes/second (floor division)."""
    if t <= t_prev:
        raise ValueError(f"gradient needs t > t_prev, got {t} <= {t_prev}")
    return (qlen - qlen_prev) * _NS_PER_S // (t - t_prev)


class EinDetector:
    """Per-port incast detector state (sliding gradient window + hysteresis).

    update() is called exactly once per dequeue, before the packet departs.
    Identical timestamps contribute no gradient sample but still run the
    threshold/hysteresis decision. Window contents persist across idle
    periods.
    """

    __slots__ = ("qlen_prev", "t_prev", "window", "window_sum", "ein_prev",
                 "n", "threshold", "high_water")

    def __init__(self, n: int, threshold: float, high_water: int):
        self.qlen_prev = 0
        self.t_prev = 0
        self.window: deque[int] = deque()
        self.window_sum = 0
        self.ein_prev = False
        self.n = n
        self.threshold = threshold
        self.high_water = high_water

    def update(self, qlen: int, now: int) -> bool:
        t_prev = self.t_prev
        if now > t_prev:
            gradient = (qlen - self.qlen_prev) * _NS_PER_S // (now - t_prev)
            window = self.window
            if len(window) == self.n:
                self.window_sum -= window.popleft()
            window.append(gradient)
            self.window_sum += gradient
            self.t_prev = now
        self.qlen_prev = qlen
        # Average over however many samples exist so far; comparison is done
        # as sum > threshold * count to keep it exact for integer sums.
        count = len(self.window)
        if count and self.window_sum > self.threshold * count:
            self.ein_prev = True
            return True
        if self.ein_prev:
            if qlen > self.high_water:
                return True
            self.ein_prev = False
        return False


class OutputPort:
    """FIFO output queue with tail drop, draining at line rate.

    Service model: a dequeue removes the head packet, applies marks against
    the post-removal queue length, hands the packet to the link (arrival at
    the next node after link_delay), and occupies the transmitter for
    size * 8 / line_rate before the next dequeue.
    """

    __slots__ = ("port_id", "engine", "queue", "qlen", "busy", "detector",
                 "ein_marking", "line_rate", "k_bytes", "capacity",
                 "link_delay", "enq_pkts", "enq_bytes", "deq_pkts",
                 "deq_bytes", "drop_pkts", "drop_bytes", "ce_marks",
                 "ein_marks", "max_qlen", "first_ein_deq_index")

    def __init__(self, port_id: str, engine: Engine, config: PortConfig,
                 link_delay: int, ein_marking: bool = True):
        self.port_id = port_id
        self.engine = engine
        self.queue: deque[Packet] = deque()
        self.qlen = 0
        self.busy = False
        # Incast detection runs at switch output ports only; host NIC
        # egress serializes and CE-marks (sender-side qdisc backpressure)
        # but never generates incast marks.
        self.ein_marking = ein_marking
        self.detector = EinDetector(
            config.ein_window_n, config.ein_threshold, config.high_water_mark
        )
        self.line_rate = config.line_rate
        self.k_bytes = config.ecn_threshold_k
        self.capacity = config.buffer_capacity
        self.link_delay = link_delay
        self.enq_pkts = 0
        self.enq_bytes = 0
        self.deq_pkts = 0
        self.deq_bytes = 0
        self.drop_pkts = 0
        self.drop_bytes = 0
        self.ce_marks = 0
        self.ein_marks = 0
        self.max_qlen = 0
        self.first_ein_deq_index = -1

    def enqueue(self, pkt: Packet, now: int) -> bool:
        """Append or tail-drop; returns True when accepted."""
        size = pkt.size
        new_qlen = self.qlen + size
        if new_qlen > self.capacity:
            self.drop_pkts += 1
            self.drop_bytes += size
            return False
        self.queue.append(pkt)
        self.qlen = new_qlen
        if new_qlen > self.max_qlen:
            self.max_qlen = new_qlen
        self.enq_pkts += 1
        self.enq_bytes += size
        if not self.busy:
            # Service starts as a same-timestamp event so the append is
            # observable (and ordered) before the head packet departs.
            self.busy = True
            self.engine.schedule(now, SERVICE_COMPLETION, self)
        return True

    def begin_service(self, now: int) -> Packet:
        """Dequeue the head packet: mark, forward, occupy the transmitter."""
        pkt = self.queue.popleft()
        size = pkt.size
        qlen = self.qlen - size
        self.qlen = qlen
        self.deq_pkts += 1
        self.deq_bytes += size
        if self.ein_marking:
            mark = self.detector.update(qlen, now)
        else:
            mark = False
        if not pkt.is_ack:
            if mark:
                pkt.ein_mark = True
                self.ein_marks += 1
                if self.first_ein_deq_index < 0:
                    self.first_ein_deq_index = self.deq_pkts
            if pkt.ecn_capable and qlen > self.k_bytes:
                pkt.ce_mark = True
                self.ce_marks += 1
        engine = self.engine
        engine.schedule(now + self.link_delay, PACKET_ARRIVAL, pkt)
        engine.schedule(
            now + size * 8 * _NS_PER_S // self.line_rate,
            SERVICE_COMPLETION, self,
        )
        return pkt


def attach_fabric_handlers(engine: Engine) -> None:
    """Register the packet-forwarding and port-service event handlers."""

    def on_arrival(pkt: Packet) -> None:
        hop = pkt.hop
        route = pkt.route
        if hop == len(route):
            pkt.conn.deliver(pkt, engine.now)
        else:
            pkt.hop = hop + 1
            route[hop].enqueue(pkt, engine.now)

    def on_service(port: OutputPort) -> None:
        if port.queue:
            port.begin_service(engine.now)
        else:
            port.busy = False

    engine.register(PACKET_ARRIVAL, on_arrival)
    engine.register(SERVICE_COMPLETION, on_service)


def send_on_route(pkt: Packet, now: int) -> None:
    """Inject a freshly built packet into the first port of its route."""
    pkt.hop = 1
    pkt.route[0].enqueue(pkt, now)


class Topology:
    """Leaf-spine fabric wiring: hosts under leaves, full leaf-spine mesh.

    Cross-leaf paths are host->leaf->spine->leaf->host (4 hops); same-leaf
    pairs take host->leaf->host (2 hops). The spine for a flow is a
    deterministic hash of its flow id, fixed for the flow's lifetime, so
    per-flow FIFO ordering holds.
    """

    def __init__(self, n_leaves, hosts_per_leaf, n_spines, line_rate,
                 link_delay, host_ports, leaf_down, leaf_up, spine_down):
        self.n_leaves = n_leaves
        self.hosts_per_leaf = hosts_per_leaf
        self.n_spines = n_spines
        self.line_rate = line_rate
        self.link_delay = link_delay
        self.host_ports = host_ports
        self.leaf_down = leaf_down
        self.leaf_up = leaf_up
        self.spine_down = spine_down

    @property
    def n_hosts(self) -> int:
        return self.n_leaves * self.hosts_per_leaf

    def leaf_of(self, host: int) -> int:
        return host // self.hosts_per_leaf

    def spine_for_flow(self, flow_id: int) -> int:
        return mix64(flow_id) % self.n_spines

    def oversubscription(self) -> float:
        return (self.hosts_per_leaf * self.line_rate) / (
            self.n_spines * self.line_rate
        )

    def unloaded_rtt_ns(self, src: int, dst: int) -> int:
        hops = 2 if self.leaf_of(src) == self.leaf_of(dst) else 4
        return 2 * hops * self.link_delay

    def route(self, src: int, dst: int, flow_id: int) -> tuple[OutputPort, ...]:
        """Ordered output ports a packet traverses from src host to dst host."""
        src_leaf = self.leaf_of(src)
        dst_leaf = self.leaf_of(dst)
        dst_local = dst % self.hosts_per_leaf
        if src_leaf == dst_leaf:
            return (
                self.host_ports[src],
                self.leaf_down[dst_leaf][dst_local],
            )
        spine = self.spine_for_flow(flow_id)
        return (
            self.host_ports[src],
            self.leaf_up[src_leaf][spine],
            self.spine_down[spine][dst_leaf],
            self.leaf_down[dst_leaf][dst_local],
        )

    def all_ports(self):
        for port in self.host_ports:
            yield port
        for group in (self.leaf_down, self.leaf_up, self.spine_down):
            for ports in group:
                yield from ports

    def port_by_id(self, port_id: str) -> OutputPort:
        for port in self.all_ports():
            if port.port_id == port_id:
                return port
        raise KeyError(f"no port named {port_id!r}")


def build_leaf_spine(n_leaves: int, hosts_per_leaf: int, n_spines: int,
                     line_rate: int, link_delay: int, engine: Engine,
                     port_config: PortConfig) -> Topology:
    """Construct the fabric; every link runs at line_rate with link_delay."""
    if n_leaves < 1 or hosts_per_leaf < 1 or n_spines < 1:
        raise ValueError("topology counts must all be >= 1")

    def port(name: str) -> OutputPort:
        return OutputPort(name, engine, port_config, link_delay)

    # Host NICs serialize at line rate and CE-mark above K (sender-side
    # qdisc backpressure, as ECN-enabled host qdiscs do) but never drop
    # their own window bursts and never generate incast marks; the shared
    # buffer limit and incast detection belong to switch ports.
    nic_config = PortConfig(
        line_rate=port_config.line_rate,
        ecn_threshold_k=port_config.ecn_threshold_k,
        buffer_capacity=1 << 34,
        ein_window_n=port_config.ein_window_n,
        ein_threshold=port_config.ein_threshold,
        high_water_mark=port_config.high_water_mark,
    )
    n_hosts = n_leaves * hosts_per_leaf
    host_ports = [
        OutputPort(f"host{h}->leaf{h // hosts_per_leaf}", engine, nic_config,
                   link_delay, ein_marking=False)
        for h in range(n_hosts)
    ]
    leaf_down = [
        [port(f"leaf{l}->host{l * hosts_per_leaf + i}")
         for i in range(hosts_per_leaf)]
        for l in range(n_leaves)
    ]
    leaf_up = [
        [port(f"leaf{l}->spine{s}") for s in range(n_spines)]
        for l in range(n_leaves)
    ]
    spine_down = [
        [port(f"spine{s}->leaf{l}") for l in range(n_leaves)]
        for s in range(n_spines)
    ]
    return Topology(n_leaves, hosts_per_leaf, n_spines, line_rate, link_delay,
                    host_ports, leaf_down, leaf_up, spine_down)
