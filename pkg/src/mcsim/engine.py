"""Deterministic discrete-event engine: clock, future-event list, seeded RNG streams.

Time is integer microseconds.  Events fire in (fire_at, seq) order, where seq
is a monotone scheduling counter, so ties resolve in scheduling order.  A run
owns one :class:`EventLoop`; nothing here is thread-safe.
"""

from __future__ import annotations

import hashlib
import heapq
import random
from dataclasses import dataclass

SimTime = int  # microseconds since simulation start

US_PER_MS = 1_000
US_PER_S = 1_000_000


def ms(value: float) -> SimTime:
    return round(value * US_PER_MS)


def seconds(value: float) -> SimTime:
    return round(value * US_PER_S)


class SchedulingError(RuntimeError):
    """Raised when an event is scheduled in the past."""


class EventHandle:
    """Cancellation token for a scheduled event."""

    __slots__ = ("fire_at", "seq", "fn", "label", "cancelled", "fired")

    def __init__(self, fire_at: SimTime, seq: int, fn, label: str):
        self.fire_at = fire_at
        self.seq = seq
        self.fn = fn
        self.label = label
        self.cancelled = False
        self.fired = False


@dataclass
class RunSummary:
    events_processed: int
    final_time: SimTime


class EventLoop:
    """Single-threaded future-event list with a monotonic microsecond clock."""

    def __init__(self) -> None:
        self._now: SimTime = 0
        self._seq = 0
        self._heap: list[tuple[SimTime, int, EventHandle]] = []
        self.scheduled_total = 0
        self.processed_total = 0
        self.cancelled_total = 0

    def now(self) -> SimTime:
        return self._now

    def schedule_at(self, fire_at: SimTime, fn, label: str = "") -> EventHandle:
        if fire_at < self._now:
            raise SchedulingError(
                f"cannot schedule {label or 'event'} at t={fire_at} before now={self._now}"
            )
        handle = EventHandle(fire_at, self._seq, fn, label)
        self._seq += 1
        self.scheduled_total += 1
        heapq.heappush(self._heap, (fire_at, handle.seq, handle))
        return handle

    def schedule_after(self, delay: SimTime, fn, label: str = "") -> EventHandle:
        return self.schedule_at(self._now + delay, fn, label)

    def cancel(self, handle: EventHandle | None) -> bool:
        """Remove an event before it fires.  Idempotent; lazy deletion."""
        if handle is None or handle.cancelled or handle.fired:
            return False
        handle.cancelled = True
        self.cancelled_total += 1
        return True

    def pending_count(self) -> int:
        return sum(1 for _, _, h in self._heap if not (h.cancelled or h.fired))

    def run_until(self, t_end: SimTime) -> RunSummary:
        """Process every event with fire_at <= t_end; leave the clock at t_end."""
        if t_end < self._now:
            raise SchedulingError(f"t_end={t_end} is before now={self._now}")
        processed = 0
        while self._heap and self._heap[0][0] <= t_end:
            fire_at, _, handle = heapq.heappop(self._heap)
            if handle.cancelled:
                continue
            self._now = fire_at
            handle.fired = True
            processed += 1
            self.processed_total += 1
            handle.fn()
        self._now = t_end
        return RunSummary(events_processed=processed, final_time=t_end)


def derive_seed(seed: int, label: str) -> int:
    """Stable 64-bit sub-seed from (seed, label); platform-independent."""
    digest = hashlib.sha256(f"{seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


class RandomStreams:
    """One independent PRNG sub-stream per named component.

    Streams are derived from (seed, label) so adding a component never
    perturbs the draw sequence of another.
    """

    def __init__(self, seed: int):
        self.seed = seed
        self._streams: dict[str, random.Random] = {}

    def stream(self, label: str) -> random.Random:
        rng = self._streams.get(label)
        if rng is None:
            rng = random.Random(derive_seed(self.seed, label))
            self._streams[label] = rng
        return rng
