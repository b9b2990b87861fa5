"""One communication path: backhaul-delay prefix, FIFO queue, trace-driven link.

A PDU accepted at time t becomes eligible for serialization at
t + backhaul_delay (the anchor's own air interface has delay 0).  The link
serializes one PDU at a time at the capacity in force when serialization
starts; a zero-rate second stalls the head PDU until the next nonzero-rate
second.  Loss is an independent Bernoulli draw per PDU on completion.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .engine import EventLoop, SimTime, US_PER_S
from .pdcp_tx import PdcpPdu
from .trace import ChannelTrace, CqiRateTable, rate_at


@dataclass
class PathConfig:
    path_id: str
    trace: ChannelTrace
    peak_rate_bps: float
    rate_table: CqiRateTable = field(default_factory=CqiRateTable)
    backhaul_delay_us: SimTime = 0
    prop_delay_us: SimTime = 5_000
    queue_limit_bytes: int = 500 * 1400
    loss_prob: float = 0.0

    def __post_init__(self):
        if self.backhaul_delay_us < 0:
            raise ValueError("backhaul_delay must be >= 0")
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ValueError("loss_prob must be in [0, 1]")
        if self.queue_limit_bytes <= 0:
            raise ValueError("queue_limit_bytes must be positive")


@dataclass
class PathStats:
    enqueued: int = 0
    dequeued: int = 0
    dropped_overflow: int = 0
    dropped_loss: int = 0
    bytes_sent: int = 0


class PathTx:
    """Runtime state of one path inside a simulation run."""

    def __init__(self, loop: EventLoop, cfg: PathConfig, loss_rng, deliver_fn, collector=None):
        self.loop = loop
        self.cfg = cfg
        self.path_id = cfg.path_id
        self.stats = PathStats()
        self._loss_rng = loss_rng
        self._deliver_fn = deliver_fn  # called as deliver_fn(pdu, t) at the receiver
        self._collector = collector
        self._fifo: deque[PdcpPdu] = deque()
        self._queue_bytes = 0  # backhaul-pending + waiting + in-service bytes
        self._backhaul_pending = 0
        self._in_prop_flight = 0
        self._busy = False
        self._stall_retry = None

    # -- transmitter-facing view -------------------------------------------

    def flow_control_queue_bytes(self) -> int:
        return self._queue_bytes

    def flow_control_rate_bps(self) -> float:
        return self.rate_now(self.loop.now())

    def rate_now(self, t: SimTime) -> float:
        return rate_at(self.cfg.trace, self.cfg.rate_table, self.cfg.peak_rate_bps, t)

    def residual_pdus(self) -> int:
        """PDUs still inside this path: backhaul transit, queue, link, propagation."""
        return self._backhaul_pending + len(self._fifo) + (1 if self._busy else 0) + self._in_prop_flight

    # -- data plane ----------------------------------------------------------

    def enqueue(self, pdu: PdcpPdu, t: SimTime) -> bool:
        if self._queue_bytes + pdu.size_bytes > self.cfg.queue_limit_bytes:
            self.stats.dropped_overflow += 1
            if self._collector is not None:
                self._collector.on_path_drop(pdu)
            return False
        self.stats.enqueued += 1
        self._queue_bytes += pdu.size_bytes
        if self.cfg.backhaul_delay_us > 0:
            self._backhaul_pending += 1
            self.loop.schedule_at(
                t + self.cfg.backhaul_delay_us,
                lambda: self._admit(pdu),
                label=f"backhaul:{self.path_id}",
            )
        else:
            self._admit(pdu)
        return True

    def _admit(self, pdu: PdcpPdu) -> None:
        if self.cfg.backhaul_delay_us > 0:
            self._backhaul_pending -= 1
        self._fifo.append(pdu)
        self._try_start()

    def _try_start(self) -> None:
        if self._busy or self._stall_retry is not None or not self._fifo:
            return
        t = self.loop.now()
        rate = self.rate_now(t)
        if rate < 1.0:  # zero-rate second (or degenerate config): stall to next second
            next_second = (t // US_PER_S + 1) * US_PER_S
            self._stall_retry = self.loop.schedule_at(
                next_second, self._retry_after_stall, label=f"stall:{self.path_id}"
            )
            return
        pdu = self._fifo.popleft()
        self._busy = True
        bits = pdu.size_bytes * 8
        duration = -(-(bits * US_PER_S) // int(rate))  # ceil, integer microseconds
        self.loop.schedule_at(t + duration, lambda: self._finish(pdu), label=f"txdone:{self.path_id}")

    def _retry_after_stall(self) -> None:
        self._stall_retry = None
        self._try_start()

    def _finish(self, pdu: PdcpPdu) -> None:
        t = self.loop.now()
        self._busy = False
        self._queue_bytes -= pdu.size_bytes
        self.stats.dequeued += 1
        self.stats.bytes_sent += pdu.size_bytes
        if self._collector is not None:
            self._collector.on_path_sent(self.path_id, pdu.size_bytes, t)
        if self.cfg.loss_prob > 0.0 and self._loss_rng.random() < self.cfg.loss_prob:
            self.stats.dropped_loss += 1
            if self._collector is not None:
                self._collector.on_path_drop(pdu)
        else:
            self._in_prop_flight += 1
            self.loop.schedule_at(
                t + self.cfg.prop_delay_us,
                lambda: self._arrive(pdu),
                label=f"arrive:{self.path_id}",
            )
        self._try_start()

    def _arrive(self, pdu: PdcpPdu) -> None:
        self._in_prop_flight -= 1
        self._deliver_fn(pdu, self.loop.now())
