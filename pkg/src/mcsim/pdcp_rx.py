"""PDCP receiver at the UE: duplicate discard, reordering window, t-Reordering timer.

COUNT-based window formulation: RX_DELIV is the first COUNT not yet delivered,
RX_NEXT follows the highest received, RX_REORD snapshots RX_NEXT when the
timer arms.  The receiver reconstructs COUNT from the on-the-wire SN by
choosing the candidate closest to the window pivot within 2^(sn_len-1).

With reordering disabled, every non-duplicate PDU is delivered immediately in
arrival order; window state is kept only for duplicate detection and COUNT
recovery.
"""

from __future__ import annotations

from dataclasses import dataclass

from .engine import EventLoop, SimTime
from .pdcp_tx import PdcpPdu


@dataclass
class Delivery:
    sdu_id: int
    count: int
    pdu: PdcpPdu
    delivered_at: SimTime


class PdcpReceiver:
    """Receive-side window state machine for one bearer."""

    def __init__(
        self,
        loop: EventLoop,
        sn_len: int,
        t_reordering_us: SimTime,
        reordering_enabled: bool,
        deliver_fn=None,
        collector=None,
    ):
        self.loop = loop
        self.sn_len = sn_len
        self.sn_modulus = 1 << sn_len
        self.half_window = 1 << (sn_len - 1)
        self.t_reordering_us = t_reordering_us
        self.reordering_enabled = reordering_enabled
        self.deliver_fn = deliver_fn
        self.collector = collector

        self.rx_deliv = 0
        self.rx_next = 0
        self.rx_reord = 0
        self._timer = None
        self._buffer: dict[int, PdcpPdu] = {}
        self._buffer_bytes = 0
        self._declared: set[int] = set()  # counts skipped at expiry, for stale labeling
        # reordering-off bookkeeping: seen-set above a compacting watermark
        self._seen_watermark = 0
        self._seen: set[int] = set()

    # -- COUNT recovery --------------------------------------------------------

    def recover_count(self, sn: int) -> int:
        """Infer the full COUNT for a received SN near the window pivot."""
        pivot = self.rx_deliv if self.reordering_enabled else self.rx_next
        pivot_sn = pivot % self.sn_modulus
        hfn = pivot >> self.sn_len
        if sn < pivot_sn - self.half_window:
            hfn += 1
        elif sn >= pivot_sn + self.half_window:
            hfn -= 1
        if hfn < 0:
            hfn = 0
        return (hfn << self.sn_len) + sn

    # -- occupancy ---------------------------------------------------------------

    def buffer_occupancy(self) -> tuple[int, int]:
        """(bytes, PDU count) currently held in the reordering buffer."""
        return self._buffer_bytes, len(self._buffer)

    def timer_running(self) -> bool:
        return self._timer is not None

    # -- receive path ----------------------------------------------------------

    def receive(self, pdu: PdcpPdu, t: SimTime) -> list[Delivery]:
        count = self.recover_count(pdu.sn)
        if self.reordering_enabled:
            return self._receive_reordering(pdu, count, t)
        return self._receive_immediate(pdu, count, t)

    def _receive_immediate(self, pdu: PdcpPdu, count: int, t: SimTime) -> list[Delivery]:
        if count < self._seen_watermark or count in self._seen:
            self._discard_duplicate(pdu, t)
            return []
        self._seen.add(count)
        while self._seen_watermark in self._seen:
            self._seen.discard(self._seen_watermark)
            self._seen_watermark += 1
        if count >= self.rx_next:
            self.rx_next = count + 1
        self.rx_deliv = self._seen_watermark
        return [self._deliver(pdu, count, t)]

    def _receive_reordering(self, pdu: PdcpPdu, count: int, t: SimTime) -> list[Delivery]:
        if count < self.rx_deliv:
            if count in self._declared:
                self._discard_stale(pdu, t)
            else:
                self._discard_duplicate(pdu, t)
            return []
        if count in self._buffer:
            self._discard_duplicate(pdu, t)
            return []

        self._buffer[count] = pdu
        self._buffer_bytes += pdu.size_bytes
        if count >= self.rx_next:
            self.rx_next = count + 1

        batch: list[Delivery] = []
        if count == self.rx_deliv:
            c = self.rx_deliv
            while c in self._buffer:
                batch.append(self._deliver_from_buffer(c, t))
                c += 1
            self.rx_deliv = c

        if self._timer is not None and self.rx_deliv >= self.rx_reord:
            self.loop.cancel(self._timer)
            self._timer = None
        if self._timer is None and self.rx_deliv < self.rx_next:
            self.rx_reord = self.rx_next
            self._timer = self.loop.schedule_at(
                t + self.t_reordering_us, self._on_expiry, label="t-reordering"
            )
        self._notify_buffer_level(t)
        return batch

    def _on_expiry(self) -> None:
        t = self.loop.now()
        self._timer = None
        batch: list[Delivery] = []
        # Flush everything below RX_REORD; the gaps in between are declared lost.
        for c in range(self.rx_deliv, self.rx_reord):
            if c in self._buffer:
                batch.append(self._deliver_from_buffer(c, t))
            else:
                self._declared.add(c)
                if self.collector is not None:
                    self.collector.on_declared_lost(c)
        c = self.rx_reord
        while c in self._buffer:
            batch.append(self._deliver_from_buffer(c, t))
            c += 1
        self.rx_deliv = c
        if self.rx_deliv < self.rx_next:
            self.rx_reord = self.rx_next
            self._timer = self.loop.schedule_at(
                t + self.t_reordering_us, self._on_expiry, label="t-reordering"
            )
        self._notify_buffer_level(t)

    # -- helpers -------------------------------------------------------------

    def _deliver_from_buffer(self, count: int, t: SimTime) -> Delivery:
        pdu = self._buffer.pop(count)
        self._buffer_bytes -= pdu.size_bytes
        return self._deliver(pdu, count, t)

    def _deliver(self, pdu: PdcpPdu, count: int, t: SimTime) -> Delivery:
        delivery = Delivery(sdu_id=pdu.sdu_id, count=count, pdu=pdu, delivered_at=t)
        if self.collector is not None:
            self.collector.on_delivered(pdu, count, t)
        if self.deliver_fn is not None:
            self.deliver_fn(delivery)
        return delivery

    def _discard_duplicate(self, pdu: PdcpPdu, t: SimTime) -> None:
        if self.collector is not None:
            self.collector.on_duplicate_discarded(pdu, t)

    def _discard_stale(self, pdu: PdcpPdu, t: SimTime) -> None:
        if self.collector is not None:
            self.collector.on_stale_discarded(pdu, t)

    def _notify_buffer_level(self, t: SimTime) -> None:
        if self.collector is not None:
            self.collector.on_reorder_buffer_level(self._buffer_bytes, t)
