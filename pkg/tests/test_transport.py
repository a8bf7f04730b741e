"""Controller state machines, echo policy, recovery, and reliability."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pulsim.engine import Engine
from pulsim.fabric import (
    HEADER_BYTES,
    Packet,
    PortConfig,
    attach_fabric_handlers,
    build_leaf_spine,
)
from pulsim.transport import (
    CONG_AVOID,
    SLOW_START,
    CongestionControl,
    Connection,
    TransportParams,
    attach_transport_handlers,
)

MSS = 1460
PARAMS = TransportParams()


class FakePort:
    """Route stub: accepts every packet and records it."""

    def __init__(self):
        self.sent = []

    def enqueue(self, pkt, now):
        self.sent.append((now, pkt))
        return True


def make_cc(ein_enabled=True, cwnd_mss=None):
    cc = CongestionControl(PARAMS, ein_enabled=ein_enabled)
    if cwnd_mss is not None:
        cc.st.cwnd = cwnd_mss * MSS
        cc.st.batch_target_seq = cc.st.batch_start_seq + cc.st.cwnd
    return cc


def feed_window(cc, cum_ack, marked=False, ein=False):
    """Ack one full observation window in MSS steps; returns new cum_ack."""
    target = cc.st.batch_target_seq
    while cum_ack < target:
        cum_ack = min(cum_ack + MSS, target)
        cc.on_ack(ein, marked, MSS, cum_ack, cum_ack + cc.st.cwnd)
    return cum_ack


# --- dctcp ------------------------------------------------------------------

def test_unmarked_window_updates_alpha_and_grows():
    cc = make_cc(ein_enabled=False)
    cc.st.alpha = 0.5
    cwnd0 = cc.st.cwnd
    feed_window(cc, 0)
    assert cc.st.alpha == 0.46875  # (1 - 1/16) * 0.5
    assert cc.st.cwnd > cwnd0


def test_fully_marked_window_halves_cwnd():
    cc = make_cc(ein_enabled=False)
    cc.st.alpha = 1.0
    cwnd0 = cc.st.cwnd
    feed_window(cc, 0, marked=True)
    assert cc.st.alpha == 1.0
    assert cc.st.cwnd == max(MSS, cwnd0 // 2)
    assert cc.st.state == CONG_AVOID


def test_no_marks_behaves_as_additive_increase():
    cc = make_cc(ein_enabled=False)
    cc.st.state = CONG_AVOID
    cc.st.ssthresh = cc.st.cwnd
    cum = 0
    cwnd0 = cc.st.cwnd
    for i in range(1, 6):
        cum = feed_window(cc, cum)
        assert cc.st.alpha == 0.0
        assert cc.st.cwnd == cwnd0 + i * MSS


def test_slow_start_doubles_per_window():
    cc = make_cc(ein_enabled=False)
    assert cc.st.state == SLOW_START
    cwnd0 = cc.st.cwnd
    feed_window(cc, 0)
    assert cc.st.cwnd == 2 * cwnd0


# --- pulser -----------------------------------------------------------------

def test_first_ein_echo_brakes_to_safe_window():
    cc = make_cc(cwnd_mss=100)
    cc.on_ack(True, False, MSS, MSS, 100 * MSS)
    assert cc.st.cwnd_prev == 100 * MSS
    assert cc.st.cwnd == 4 * MSS
    assert cc.st.braked is True


def test_clean_batch_restores_saved_window():
    cc = make_cc(cwnd_mss=100)
    snd_nxt = 100 * MSS
    cc.on_ack(True, False, MSS, MSS, snd_nxt)
    cum = feed_window(cc, snd_nxt)
    assert cc.st.braked is False
    assert cc.st.cwnd == 100 * MSS


def test_second_ein_does_not_overwrite_saved_window():
    cc = make_cc(cwnd_mss=100)
    cc.on_ack(True, False, MSS, MSS, 100 * MSS)
    cc.on_ack(True, False, MSS, 2 * MSS, 100 * MSS)
    assert cc.st.cwnd == 4 * MSS
    assert cc.st.cwnd_prev == 100 * MSS
    assert cc.st.ein_seen_in_batch is True


def test_dirty_batch_defers_restore_until_clean_one():
    cc = make_cc(cwnd_mss=100)
    snd_nxt = 100 * MSS
    cc.on_ack(True, False, MSS, MSS, snd_nxt)
    # EIN arrives mid-batch: this batch must not restore.
    cc.on_ack(True, False, MSS, 2 * MSS, snd_nxt)
    cum = feed_window(cc, snd_nxt)
    assert cc.st.braked is True
    assert cc.st.cwnd == 4 * MSS
    cum = feed_window(cc, cum)
    assert cc.st.braked is False
    assert cc.st.cwnd == 100 * MSS


def test_alpha_bookkeeping_continues_while_braked():
    cc = make_cc(cwnd_mss=100)
    snd_nxt = 100 * MSS
    cc.on_ack(True, False, MSS, MSS, snd_nxt)
    feed_window(cc, snd_nxt, marked=True)
    assert cc.st.alpha == 1.0 / 16.0
    assert cc.st.cwnd == 100 * MSS  # restored, multiplicative cut suppressed


# --- loss events ------------------------------------------------------------

def test_timeout_halves_ssthresh_and_resets_cwnd():
    cc = make_cc(cwnd_mss=80)
    cc.on_timeout(0)
    assert cc.st.ssthresh == 40 * MSS
    assert cc.st.cwnd == MSS
    assert cc.st.state == SLOW_START


def test_timeout_while_braked_kills_stale_save():
    cc = make_cc(cwnd_mss=100)
    cc.on_ack(True, False, MSS, MSS, 100 * MSS)
    cc.on_timeout(MSS)
    assert cc.st.braked is False
    assert cc.st.cwnd_prev is None
    assert cc.st.cwnd == MSS
    # A later clean batch grows normally instead of restoring.
    cum = feed_window(cc, MSS)
    assert cc.st.cwnd != 100 * MSS


def test_fast_retransmit_halves_when_not_braked():
    cc = make_cc(ein_enabled=False, cwnd_mss=40)
    cc.on_fast_retransmit(0)
    assert cc.st.cwnd == 20 * MSS
    assert cc.st.ssthresh == 20 * MSS


def test_fast_retransmit_is_not_braked_related():
    # While braked the sender already sits at the safe floor: the segment
    # is resent but the brake and its saved window survive.
    cc = make_cc(cwnd_mss=100)
    cc.on_ack(True, False, MSS, MSS, 100 * MSS)
    cc.on_fast_retransmit(MSS)
    assert cc.st.braked is True
    assert cc.st.cwnd == 4 * MSS
    assert cc.st.cwnd_prev == 100 * MSS


# --- send_allowed -----------------------------------------------------------

@pytest.mark.parametrize("cwnd,in_flight,expect", [
    (10 * MSS, 10 * MSS, 0),
    (4 * MSS, 0, 4 * MSS),
    (int(4.5 * MSS), 4 * MSS, 0),
    (int(4.5 * MSS), 0, 4 * MSS),
    (10 * MSS, 12 * MSS, 0),
])
def test_send_allowed_quantizes_to_whole_segments(cwnd, in_flight, expect):
    cc = make_cc()
    cc.st.cwnd = cwnd
    assert cc.send_allowed(in_flight) == expect


# --- fuzzed controller invariants --------------------------------------------

@given(st.integers(0, 2**32), st.booleans())
@settings(max_examples=300, deadline=None)
def test_controller_invariants_under_random_interleavings(seed, ein_enabled):
    rng = random.Random(seed)
    cc = CongestionControl(PARAMS, ein_enabled=ein_enabled)
    cum_ack = 0
    snd_nxt = cc.send_allowed(0)
    saved_at_entry = None
    for _ in range(400):
        was_braked = cc.st.braked
        op = rng.random()
        if op < 0.70:
            newly = min(MSS * rng.randint(1, 3), snd_nxt - cum_ack)
            if newly > 0:
                cum_ack += newly
            cc.on_ack(rng.random() < 0.2, rng.random() < 0.3, max(newly, 0),
                      cum_ack, snd_nxt)
        elif op < 0.85:
            cc.on_ack(rng.random() < 0.2, rng.random() < 0.3, 0,
                      cum_ack, snd_nxt)
        elif op < 0.95:
            cc.on_fast_retransmit(cum_ack)
        else:
            cc.on_timeout(cum_ack)
            snd_nxt = cum_ack
        snd_nxt = max(snd_nxt, cum_ack) + cc.send_allowed(snd_nxt - cum_ack)

        st_ = cc.st
        assert 0.0 <= st_.alpha <= 1.0
        assert st_.cwnd >= MSS
        if st_.braked:
            assert st_.cwnd == st_.cwnd_safe
            if not was_braked:
                saved_at_entry = st_.cwnd_prev
        elif was_braked and st_.cwnd_prev is None and op < 0.85:
            # Brake ended through batch completion: exact restore.
            assert st_.cwnd == saved_at_entry


@given(st.integers(0, 2**32))
@settings(max_examples=200, deadline=None)
def test_pulser_identical_to_dctcp_without_ein(seed):
    rng = random.Random(seed)
    a = CongestionControl(PARAMS, ein_enabled=False)
    b = CongestionControl(PARAMS, ein_enabled=True)
    cum_ack, snd_nxt = 0, a.send_allowed(0)
    for _ in range(300):
        if rng.random() < 0.8:
            newly = min(MSS, snd_nxt - cum_ack)
            cum_ack += max(newly, 0)
        else:
            newly = 0
        ecn = rng.random() < 0.3
        a.on_ack(False, ecn, max(newly, 0), cum_ack, snd_nxt)
        b.on_ack(False, ecn, max(newly, 0), cum_ack, snd_nxt)
        if rng.random() < 0.03:
            a.on_timeout(cum_ack)
            b.on_timeout(cum_ack)
            snd_nxt = cum_ack
        snd_nxt = max(snd_nxt, cum_ack) + a.send_allowed(snd_nxt - cum_ack)
        assert a.st.cwnd == b.st.cwnd
        assert a.st.alpha == b.st.alpha
        assert a.st.state == b.st.state
        assert a.st.batch_target_seq == b.st.batch_target_seq


# --- connection endpoints -----------------------------------------------------

def make_sender(size=50 * MSS, scheme="pulser"):
    eng = Engine()
    attach_transport_handlers(eng)
    out = FakePort()
    back = FakePort()
    conn = Connection(1, size, (out,), (back,), eng, PARAMS, scheme)
    return eng, out, back, conn


def test_start_sends_initial_window():
    eng, out, back, conn = make_sender()
    conn.start(0)
    assert len(out.sent) == PARAMS.init_cwnd_mss
    assert out.sent[0][1].seq_lo == 0
    assert all(p.ecn_capable and not p.is_ack for _, p in out.sent)


def ack_pkt(conn, ack_no, ein=False, ecn=False, ts=0):
    return Packet(conn.flow_id, conn, (), 0, 0, HEADER_BYTES, is_ack=True,
                  send_time=0, ecn_echo=ecn, ein_echo=ein, ack_no=ack_no,
                  echo_send_time=ts)


def test_three_duplicate_acks_trigger_fast_retransmit():
    eng, out, back, conn = make_sender()
    conn.start(0)
    sent_before = len(out.sent)
    cwnd_before = conn.cc.st.cwnd
    for _ in range(3):
        conn.deliver(ack_pkt(conn, 0), 100_000)
    assert len(out.sent) == sent_before + 1
    assert out.sent[-1][1].seq_lo == 0  # retransmitted the missing head
    assert conn.cc.st.cwnd == cwnd_before // 2
    assert conn.retransmits == 1
    # Further dupacks in the same recovery window do not re-trigger.
    conn.deliver(ack_pkt(conn, 0), 110_000)
    assert len(out.sent) == sent_before + 1


def make_receiver():
    eng = Engine()
    back = FakePort()
    conn = Connection(2, 5 * MSS, (), (back,), eng, PARAMS, "dctcp")
    return conn, back


def data_pkt(conn, seq_lo, payload=MSS, ce=False, ein=False, ts=7):
    pkt = Packet(conn.flow_id, conn, (), seq_lo, seq_lo + payload,
                 payload + HEADER_BYTES, is_ack=False, send_time=ts,
                 ecn_capable=True)
    pkt.ce_mark = ce
    pkt.ein_mark = ein
    return pkt


def test_in_order_packet_acked_without_echoes():
    conn, back = make_receiver()
    conn.deliver(data_pkt(conn, 0), 50)
    _, ack = back.sent[0]
    assert ack.is_ack and ack.ack_no == MSS
    assert not ack.ecn_echo and not ack.ein_echo
    assert ack.echo_send_time == 7


def test_ce_mark_echoed_per_packet():
    conn, back = make_receiver()
    conn.deliver(data_pkt(conn, 0, ce=True), 50)
    assert back.sent[0][1].ecn_echo is True


def test_out_of_order_ein_packet_yields_dup_ack_with_echo():
    conn, back = make_receiver()
    conn.deliver(data_pkt(conn, 0), 50)
    conn.deliver(data_pkt(conn, 2 * MSS, ein=True), 60)  # gap at MSS
    _, dup = back.sent[1]
    assert dup.ack_no == MSS  # duplicate of the first ack number
    assert dup.ein_echo is True
    # Filling the gap acks everything buffered so far.
    conn.deliver(data_pkt(conn, MSS), 70)
    assert back.sent[2][1].ack_no == 3 * MSS


@given(st.integers(0, 2**32))
@settings(max_examples=200, deadline=None)
def test_receiver_range_merge_matches_set_oracle(seed):
    rng = random.Random(seed)
    size = 20 * MSS
    conn, back = make_receiver()
    conn.size = size
    covered = set()
    for _ in range(rng.randint(1, 60)):
        lo = rng.randrange(0, size - 1)
        hi = min(size, lo + rng.choice([1, 100, MSS, 2 * MSS]))
        covered.update(range(lo, hi))
        conn.deliver(data_pkt(conn, lo, payload=hi - lo), 10)
        # received byte count equals the union of delivered ranges
        assert conn.received_bytes == len(covered)
        expect_next = 0
        while expect_next in covered:
            expect_next += 1
        assert conn.next_expected == expect_next
        # buffered ranges stay disjoint and sorted
        for a, b in zip(conn.ranges, conn.ranges[1:]):
            assert a[1] < b[0]


def test_rto_backoff_doubles_and_caps():
    eng, out, back, conn = make_sender(size=100 * MSS)
    conn.start(0)
    base = conn.cc.st.rto
    deadlines = []
    now = 0
    for _ in range(12):
        now = conn.timer_target
        conn.timer_handle = None
        conn.on_timer(now)
        deadlines.append(conn.timer_target - now)
    assert deadlines[0] == min(base * 2, PARAMS.rto_max)
    assert max(deadlines) <= PARAMS.rto_max
    assert deadlines[-1] == PARAMS.rto_max


def test_lazy_timer_chases_pushed_deadline():
    eng, out, back, conn = make_sender()
    conn.start(0)
    first_deadline = conn.timer_target
    # Progress pushes the target without rescheduling the pending event.
    eng.run_until(first_deadline - 1)
    conn.deliver(ack_pkt(conn, MSS, ts=0), eng.now)
    assert conn.timer_target > first_deadline
    sent_before = len(out.sent)
    eng.run_until(first_deadline + 1)  # stale event fires and re-arms
    assert conn.timer_handle is not None
    assert len(out.sent) >= sent_before  # no spurious go-back-N retransmit
    assert conn.timeouts == 0


def test_receiver_deduplicates_overlapping_retransmissions():
    conn, back = make_receiver()
    conn.deliver(data_pkt(conn, 0), 10)
    conn.deliver(data_pkt(conn, 0), 20)
    conn.deliver(data_pkt(conn, 3 * MSS), 30)
    conn.deliver(data_pkt(conn, 3 * MSS), 40)
    conn.deliver(data_pkt(conn, MSS, payload=2 * MSS), 50)
    assert conn.next_expected == 4 * MSS
    assert conn.received_bytes == 4 * MSS


# --- end-to-end over a lossy micro-fabric -------------------------------------

def run_micro_transfer(scheme, size, buffer_bytes=6_000, n_senders=2):
    """Several senders to one receiver host through a tiny shared buffer."""
    eng = Engine()
    attach_fabric_handlers(eng)
    attach_transport_handlers(eng)
    cfg = PortConfig(line_rate=10_000_000_000, ecn_threshold_k=2 * MSS,
                     buffer_capacity=buffer_bytes, high_water_mark=4 * MSS)
    topo = build_leaf_spine(2, 2, 1, 10_000_000_000, 10_000, eng, cfg)
    done = []
    conns = []
    for i in range(n_senders):
        src, dst = 2 + (i % 2), 0
        conn = Connection(
            i, size, topo.route(src, dst, i), topo.route(dst, src, i),
            eng, PARAMS, scheme,
            on_complete=lambda c, t: done.append((c.flow_id, t)),
        )
        conns.append(conn)
        conn.start(0)
    eng.run_until(5_000_000_000)
    return conns, done, topo


@pytest.mark.parametrize("scheme", ["dctcp", "pulser"])
def test_reliable_delivery_despite_drops(scheme):
    size = 200 * MSS
    conns, done, topo = run_micro_transfer(scheme, size)
    drops = sum(p.drop_pkts for p in topo.all_ports())
    assert drops > 0  # the tiny buffer must actually bite
    assert len(done) == len(conns)
    for conn in conns:
        assert conn.next_expected == size
        assert conn.received_bytes == size  # every byte exactly once
        assert conn.ranges == []
        assert conn.sender_done
        assert conn.completed_at > 0


def test_completion_callback_fires_once():
    conns, done, _ = run_micro_transfer("pulser", 20 * MSS, buffer_bytes=50_000)
    assert sorted(f for f, _ in done) == [0, 1]
