"""Reliable byte-stream connections with pluggable congestion control.

Two controllers share one code path: the ECN-fraction controller ("dctcp")
cuts its window once per observation window in proportion to the EWMA
fraction of marked bytes; the incast overlay ("pulser") additionally saves
the window and brakes to a small safe value on the first EIN echo, then
restores the saved window after one full batch of post-brake data is acked
without any EIN echo. With EIN echoes absent the two are bit-identical.

Loss recovery is deliberately plain TCP: per-packet cumulative ACKs,
fast retransmit on three duplicate ACKs, go-back-N on retransmission
timeout with exponential backoff. A timeout supersedes the brake and
invalidates the saved window (restoring a large pre-incast window after a
timeout would be unsafe); fast retransmit is not braked-related, so a
braked sender resends the missing segment without losing its saved window.
"""

from __future__ import annotations

from dataclasses import dataclass

from .engine import TIMER_EXPIRY, Engine
from .fabric import HEADER_BYTES, Packet, send_on_route

SLOW_START = 0
CONG_AVOID = 1

_INF_SSTHRESH = 1 << 62

SCHEME_DCTCP = "dctcp"
SCHEME_PULSER = "pulser"


@dataclass
class TransportParams:
    mss: int = 1460
    init_cwnd_mss: int = 10
    cwnd_safe_mss: int = 4
    g: float = 1.0 / 16.0
    rto_initial: int = 1_000_000    # ns
    rto_min: int = 200_000          # ns
    rto_max: int = 100_000_000      # ns


class CongestionState:
    """Per-connection controller state (window arithmetic in bytes)."""

    __slots__ = ("cwnd", "cwnd_prev", "cwnd_safe", "mss", "alpha", "g",
                 "braked", "bytes_acked_in_obs_window", "bytes_marked_ce",
                 "ein_seen_in_batch", "batch_start_seq", "batch_target_seq",
                 "ssthresh", "rto", "state")

    def __init__(self, params: TransportParams):
        mss = params.mss
        self.cwnd = params.init_cwnd_mss * mss
        self.cwnd_prev: int | None = None
        self.cwnd_safe = params.cwnd_safe_mss * mss
        self.mss = mss
        self.alpha = 0.0
        self.g = params.g
        self.braked = False
        self.bytes_acked_in_obs_window = 0
        self.bytes_marked_ce = 0
        self.ein_seen_in_batch = False
        self.batch_start_seq = 0
        self.batch_target_seq = self.cwnd
        self.ssthresh = _INF_SSTHRESH
        self.rto = params.rto_initial
        self.state = SLOW_START


class CongestionControl:
    """dctcp window logic, with the pulser EIN overlay when ein_enabled."""

    __slots__ = ("st", "ein_enabled")

    def __init__(self, params: TransportParams, ein_enabled: bool):
        self.st = CongestionState(params)
        self.ein_enabled = ein_enabled

    def on_ack(self, ein_echo: bool, ecn_echo: bool, newly: int,
               cum_ack: int, snd_nxt: int) -> None:
        st = self.st
        if self.ein_enabled and ein_echo:
            if not st.braked:
                # Brake: save the window, drop to the safe value, and restart
                # the batch over data sent from this point on.
                st.cwnd_prev = st.cwnd
                st.cwnd = st.cwnd_safe
                st.braked = True
                st.batch_start_seq = snd_nxt
                st.batch_target_seq = snd_nxt + st.cwnd
                st.bytes_acked_in_obs_window = 0
                st.bytes_marked_ce = 0
                st.ein_seen_in_batch = False
                return
            st.ein_seen_in_batch = True
        st.bytes_acked_in_obs_window += newly
        if ecn_echo:
            st.bytes_marked_ce += newly
        if cum_ack >= st.batch_target_seq:
            self._complete_window(cum_ack)

    def _complete_window(self, cum_ack: int) -> None:
        st = self.st
        acked = st.bytes_acked_in_obs_window
        marked = st.bytes_marked_ce
        f = marked / acked if acked > 0 else 0.0
        st.alpha = (1.0 - st.g) * st.alpha + st.g * f
        if st.braked:
            # Cut and growth both suspended; alpha bookkeeping continues.
            if not st.ein_seen_in_batch:
                st.cwnd = st.cwnd_prev
                st.cwnd_prev = None
                st.braked = False
        elif marked > 0:
            st.cwnd = max(st.mss, int(st.cwnd * (1.0 - st.alpha / 2.0)))
            st.ssthresh = max(st.cwnd, 2 * st.mss)
            st.state = CONG_AVOID
        elif st.state == SLOW_START:
            st.cwnd += acked
            if st.cwnd >= st.ssthresh:
                st.state = CONG_AVOID
        else:
            st.cwnd += st.mss
        st.batch_start_seq = cum_ack
        st.batch_target_seq = cum_ack + st.cwnd
        st.bytes_acked_in_obs_window = 0
        st.bytes_marked_ce = 0
        st.ein_seen_in_batch = False

    def on_timeout(self, cum_ack: int) -> None:
        """Timeout supersedes everything: brake cleared, saved window gone."""
        st = self.st
        st.ssthresh = max(st.cwnd // 2, 2 * st.mss)
        st.cwnd = st.mss
        st.braked = False
        st.cwnd_prev = None
        st.state = SLOW_START
        self._reset_window(cum_ack)

    def on_fast_retransmit(self, cum_ack: int) -> None:
        # Standard halving; a braked sender already sits at the safe floor,
        # so the event is not braked-related: the segment is retransmitted
        # by the connection and the brake (with its saved window) survives.
        st = self.st
        if st.braked:
            return
        st.ssthresh = max(st.cwnd // 2, 2 * st.mss)
        st.cwnd = max(st.ssthresh, st.mss)
        st.state = CONG_AVOID
        self._reset_window(cum_ack)

    def _reset_window(self, cum_ack: int) -> None:
        st = self.st
        st.batch_start_seq = cum_ack
        st.batch_target_seq = cum_ack + st.cwnd
        st.bytes_acked_in_obs_window = 0
        st.bytes_marked_ce = 0
        st.ein_seen_in_batch = False

    def send_allowed(self, bytes_in_flight: int) -> int:
        """Window headroom in whole segments (sub-MSS remainder withheld)."""
        avail = self.st.cwnd - bytes_in_flight
        if avail <= 0:
            return 0
        mss = self.st.mss
        return (avail // mss) * mss


class Connection:
    """One flow: sender and receiver endpoints plus loss recovery.

    deliver() is the fabric's entry point for packets that reached their
    final host; ACKs go to the sender-side logic, data to the receiver.
    """

    __slots__ = ("flow_id", "size", "engine", "cc", "params", "fwd_route",
                 "rev_route", "snd_nxt", "cum_ack", "dupacks", "recover_point",
                 "srtt", "rttvar", "backoff", "timer_handle", "timer_target",
                 "sender_done", "next_expected", "ranges", "completed_at",
                 "on_complete", "trace", "retransmits", "timeouts",
                 "data_bytes_delivered", "ack_bytes_delivered")

    def __init__(self, flow_id: int, size: int, fwd_route, rev_route,
                 engine: Engine, params: TransportParams, scheme: str,
                 on_complete=None, trace: list | None = None):
        if scheme not in (SCHEME_DCTCP, SCHEME_PULSER):
            raise ValueError(f"unknown congestion control scheme {scheme!r}")
        self.flow_id = flow_id
        self.size = size
        self.engine = engine
        self.params = params
        self.cc = CongestionControl(params, ein_enabled=scheme == SCHEME_PULSER)
        self.fwd_route = fwd_route
        self.rev_route = rev_route
        self.snd_nxt = 0
        self.cum_ack = 0
        self.dupacks = 0
        self.recover_point = 0
        self.srtt = -1
        self.rttvar = 0
        self.backoff = 0
        self.timer_handle = None
        self.timer_target = 0
        self.sender_done = False
        self.next_expected = 0
        self.ranges: list[list[int]] = []
        self.completed_at = -1
        self.on_complete = on_complete
        self.trace = trace
        self.retransmits = 0
        self.timeouts = 0
        self.data_bytes_delivered = 0
        self.ack_bytes_delivered = 0

    # -- sender side --------------------------------------------------------

    def start(self, now: int) -> None:
        if self.trace is not None:
            self._record_trace(now)
        self._send_window(now)
        self._arm_timer(now)

    def _effective_rto(self) -> int:
        rto = self.cc.st.rto << self.backoff
        rto_max = self.params.rto_max
        return rto if rto < rto_max else rto_max

    def _arm_timer(self, now: int) -> None:
        self.timer_target = now + self._effective_rto()
        if self.timer_handle is None:
            self.timer_handle = self.engine.schedule(
                self.timer_target, TIMER_EXPIRY, self
            )

    def _send_window(self, now: int) -> None:
        allowed = self.cc.send_allowed(self.snd_nxt - self.cum_ack)
        mss = self.params.mss
        while allowed >= mss and self.snd_nxt < self.size:
            payload = min(mss, self.size - self.snd_nxt)
            self._transmit(self.snd_nxt, payload, now)
            self.snd_nxt += payload
            allowed -= mss

    def _transmit(self, seq: int, payload: int, now: int) -> None:
        pkt = Packet(self.flow_id, self, self.fwd_route, seq, seq + payload,
                     payload + HEADER_BYTES, is_ack=False, send_time=now,
                     ecn_capable=True)
        send_on_route(pkt, now)

    def _record_trace(self, now: int) -> None:
        st = self.cc.st
        self.trace.append((now, st.cwnd, st.braked))

    def deliver(self, pkt: Packet, now: int) -> None:
        if pkt.is_ack:
            self.ack_bytes_delivered += pkt.size
            self._on_ack(pkt, now)
        else:
            self.data_bytes_delivered += pkt.size
            self._on_data(pkt, now)

    def _on_ack(self, pkt: Packet, now: int) -> None:
        if self.sender_done:
            return
        st = self.cc.st
        trace = self.trace
        if trace is not None:
            before = (st.cwnd, st.braked)

        sample = now - pkt.echo_send_time
        if self.srtt < 0:
            self.srtt = sample
            self.rttvar = sample // 2
        else:
            self.rttvar = (3 * self.rttvar + abs(self.srtt - sample)) // 4
            self.srtt = (7 * self.srtt + sample) // 8
        rto = self.srtt + 4 * self.rttvar
        params = self.params
        st.rto = min(max(rto, params.rto_min), params.rto_max)

        newly = pkt.ack_no - self.cum_ack
        if newly > 0:
            self.cum_ack = pkt.ack_no
            if self.snd_nxt < self.cum_ack:
                # Straggler ACK from a flight sent before go-back-N rewound
                # snd_nxt; in-flight accounting must not go negative.
                self.snd_nxt = self.cum_ack
            self.dupacks = 0
            self.backoff = 0
            self.cc.on_ack(pkt.ein_echo, pkt.ecn_echo, newly, self.cum_ack,
                           self.snd_nxt)
            if self.cum_ack >= self.size:
                self.sender_done = True
                if self.timer_handle is not None:
                    self.engine.cancel(self.timer_handle)
                    self.timer_handle = None
            else:
                self.timer_target = now + self._effective_rto()
                self._send_window(now)
        else:
            self.dupacks += 1
            self.cc.on_ack(pkt.ein_echo, pkt.ecn_echo, 0, self.cum_ack,
                           self.snd_nxt)
            if self.dupacks == 3 and self.cum_ack >= self.recover_point:
                self.cc.on_fast_retransmit(self.cum_ack)
                self.recover_point = self.snd_nxt
                payload = min(self.params.mss, self.size - self.cum_ack)
                self._transmit(self.cum_ack, payload, now)
                self.retransmits += 1
                self.timer_target = now + self._effective_rto()

        if trace is not None and (st.cwnd, st.braked) != before:
            self._record_trace(now)

    def on_timer(self, now: int) -> None:
        self.timer_handle = None
        if self.sender_done:
            return
        if now < self.timer_target:
            # Lazy timer: progress pushed the deadline out; chase it.
            self.timer_handle = self.engine.schedule(
                self.timer_target, TIMER_EXPIRY, self
            )
            return
        st = self.cc.st
        trace = self.trace
        if trace is not None:
            before = (st.cwnd, st.braked)
        self.timeouts += 1
        self.backoff += 1
        self.cc.on_timeout(self.cum_ack)
        self.snd_nxt = self.cum_ack      # go-back-N from the cumulative ACK
        self.dupacks = 0
        self.recover_point = self.cum_ack
        self.retransmits += 1
        self._send_window(now)
        self._arm_timer(now)
        if trace is not None and (st.cwnd, st.braked) != before:
            self._record_trace(now)

    # -- receiver side ------------------------------------------------------

    def _on_data(self, pkt: Packet, now: int) -> None:
        lo, hi = pkt.seq_lo, pkt.seq_hi
        if lo <= self.next_expected:
            if hi > self.next_expected:
                self.next_expected = hi
                ranges = self.ranges
                while ranges and ranges[0][0] <= self.next_expected:
                    if ranges[0][1] > self.next_expected:
                        self.next_expected = ranges[0][1]
                    ranges.pop(0)
        else:
            self._buffer_range(lo, hi)
        if self.completed_at < 0 and self.next_expected >= self.size:
            self.completed_at = now
            if self.on_complete is not None:
                self.on_complete(self, now)
        ack = Packet(self.flow_id, self, self.rev_route, 0, 0, HEADER_BYTES,
                     is_ack=True, send_time=now, ecn_echo=pkt.ce_mark,
                     ein_echo=pkt.ein_mark, ack_no=self.next_expected,
                     echo_send_time=pkt.send_time)
        send_on_route(ack, now)

    def _buffer_range(self, lo: int, hi: int) -> None:
        ranges = self.ranges
        i = 0
        while i < len(ranges) and ranges[i][1] < lo:
            i += 1
        if i == len(ranges):
            ranges.append([lo, hi])
            return
        if hi < ranges[i][0]:
            ranges.insert(i, [lo, hi])
            return
        # Overlaps/adjoins ranges[i]; merge forward.
        ranges[i][0] = min(ranges[i][0], lo)
        ranges[i][1] = max(ranges[i][1], hi)
        while i + 1 < len(ranges) and ranges[i + 1][0] <= ranges[i][1]:
            ranges[i][1] = max(ranges[i][1], ranges[i + 1][1])
            ranges.pop(i + 1)

    @property
    def received_bytes(self) -> int:
        return self.next_expected + sum(hi - lo for lo, hi in self.ranges)


def attach_transport_handlers(engine: Engine) -> None:
    engine.register(TIMER_EXPIRY, lambda conn: conn.on_timer(engine.now))
