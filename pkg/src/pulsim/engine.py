"""Deterministic discrete-event core: virtual clock plus ordered event queue.

Time is integer nanoseconds. Events fire in (fire_time, seq) order, where
seq is a monotonically increasing tie-break counter assigned at scheduling
time, so two runs that schedule the same events in the same order replay
bit-identically.
"""

from __future__ import annotations

import heapq
from typing import Any, Callable

# Event kinds. Handlers are registered per kind; payload layout is
# kind-specific and owned by the registering module.
PACKET_ARRIVAL = 0
SERVICE_COMPLETION = 1
TIMER_EXPIRY = 2
FLOW_START = 3
METRICS_SAMPLE = 4

KIND_NAMES = {
    PACKET_ARRIVAL: "packet-arrival-at-node",
    SERVICE_COMPLETION: "dequeue-service-completion",
    TIMER_EXPIRY: "timer-expiry",
    FLOW_START: "flow-start",
    METRICS_SAMPLE: "metrics-sample",
}


class SchedulingError(Exception):
    """Raised when an event is scheduled in the simulated past."""


class Engine:
    """Single-threaded event loop owning the virtual clock.

    Instances are independent; run one per simulation. Conservation holds
    at all times: scheduled == fired + cancelled + pending.
    """

    __slots__ = (
        "now",
        "_heap",
        "_seq",
        "_pending",
        "_cancelled",
        "_handlers",
        "scheduled_count",
        "fired_count",
        "cancelled_count",
    )

    def __init__(self) -> None:
        self.now: int = 0
        self._heap: list[tuple[int, int, int, Any]] = []
        self._seq = 0
        self._pending: set[int] = set()
        self._cancelled: set[int] = set()
        self._handlers: list[Callable[[Any], None] | None] = [None] * 5
        self.scheduled_count = 0
        self.fired_count = 0
        self.cancelled_count = 0

    def register(self, kind: int, handler: Callable[[Any], None]) -> None:
        self._handlers[kind] = handler

    def schedule(self, fire_time: int, kind: int, payload: Any = None) -> int:
        """Schedule an event; returns a handle usable with cancel()."""
        if fire_time < self.now:
            raise SchedulingError(
                f"event kind={KIND_NAMES.get(kind, kind)} scheduled at "
                f"{fire_time} ns, before clock {self.now} ns"
            )
        seq = self._seq
        self._seq = seq + 1
        heapq.heappush(self._heap, (fire_time, seq, kind, payload))
        self._pending.add(seq)
        self.scheduled_count += 1
        return seq

    def cancel(self, handle: int) -> bool:
        """True if the event was pending and is now inert; False otherwise."""
        if handle in self._pending:
            self._pending.discard(handle)
            self._cancelled.add(handle)
            self.cancelled_count += 1
            return True
        return False

    @property
    def pending_count(self) -> int:
        return len(self._pending)

    def run_until(self, t_end: int) -> int:
        """Process every event with fire_time <= t_end; clock ends at t_end."""
        heap = self._heap
        pending = self._pending
        cancelled = self._cancelled
        handlers = self._handlers
        pop = heapq.heappop
        count = 0
        while heap:
            fire_time, seq, kind, payload = heap[0]
            if fire_time > t_end:
                break
            pop(heap)
            if seq in cancelled:
                cancelled.discard(seq)
                continue
            pending.discard(seq)
            self.now = fire_time
            handlers[kind](payload)
            count += 1
        self.fired_count += count
        if t_end > self.now:
            self.now = t_end
        return count
