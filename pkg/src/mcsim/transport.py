"""Traffic endpoints above PDCP: a constant-rate UDP source/sink and a
simplified NewReno TCP whose throughput reacts to out-of-order delivery.

One TCP segment maps to exactly one PDCP SDU; sequence numbers are in
segment units.  ACKs ride a dedicated zero-loss return line with a fixed
delay, so only the downlink direction runs over the modeled radio paths.
"""

from __future__ import annotations

from dataclasses import dataclass

from .engine import EventLoop, SimTime, US_PER_S

SLOW_START = "slow_start"
CONGESTION_AVOIDANCE = "congestion_avoidance"
FAST_RECOVERY = "fast_recovery"


class UdpSource:
    """Open-loop CBR source: SDU k is submitted at k * size * 8 / rate, exactly."""

    def __init__(self, loop: EventLoop, submit_fn, rate_bps: float, sdu_bytes: int,
                 duration_us: SimTime):
        self.loop = loop
        self.submit_fn = submit_fn  # submit_fn(size_bytes, t, payload)
        self.rate_bps = round(rate_bps)
        self.sdu_bytes = sdu_bytes
        self.duration_us = duration_us
        self.submitted = 0
        self._k = 0

    def tick_time(self, k: int) -> SimTime:
        return (k * self.sdu_bytes * 8 * US_PER_S) // self.rate_bps

    def start(self) -> None:
        if self.rate_bps <= 0:
            return
        self._schedule_next()

    def _schedule_next(self) -> None:
        next_t = self.tick_time(self._k + 1)
        if next_t <= self.duration_us:
            self.loop.schedule_at(next_t, self._tick, label="udp-tick")

    def _tick(self) -> None:
        self._k += 1
        self.submitted += 1
        self.submit_fn(self.sdu_bytes, self.loop.now(), self.submitted - 1)
        self._schedule_next()


class UdpSink:
    """Counts application bytes as PDCP hands SDUs up."""

    def __init__(self, collector):
        self.collector = collector
        self.delivered = 0

    def on_delivery(self, delivery) -> None:
        self.delivered += 1
        self.collector.on_app_bytes(delivery.pdu.size_bytes, delivery.delivered_at)


@dataclass
class TcpConfig:
    sdu_bytes: int = 1400
    init_cwnd_segments: float = 10.0
    init_ssthresh_segments: float = 100.0
    rwnd_segments: int = 10_000
    init_rto_us: SimTime = 200_000
    min_rto_us: SimTime = 200_000
    max_rto_us: SimTime = 60_000_000
    uplink_delay_us: SimTime = 5_000


@dataclass
class TcpCounters:
    segments_sent: int = 0
    retransmissions: int = 0
    fast_retransmits: int = 0
    rto_events: int = 0


class TcpSender:
    """NewReno sender with an unbounded application buffer (saturated flow)."""

    def __init__(self, loop: EventLoop, submit_fn, cfg: TcpConfig):
        self.loop = loop
        self.submit_fn = submit_fn  # submit_fn(size_bytes, t, segno)
        self.cfg = cfg
        self.cwnd = cfg.init_cwnd_segments
        self.ssthresh = cfg.init_ssthresh_segments
        self.state = SLOW_START
        self.snd_una = 0
        self.snd_nxt = 0
        self.dupacks = 0
        self.recover = 0
        self.rto = cfg.init_rto_us
        self.srtt: float | None = None
        self.rttvar = 0.0
        self.counters = TcpCounters()
        self._sent_at: dict[int, SimTime] = {}
        self._retransmitted: set[int] = set()
        self._timer = None
        self._high_water = 0  # highest snd_nxt ever reached (go-back-N resend marker)
        self._partial_seen = False

    def flight(self) -> int:
        return self.snd_nxt - self.snd_una

    def start(self) -> None:
        self._send_window()

    def _send_window(self) -> None:
        budget = min(int(self.cwnd), self.cfg.rwnd_segments)
        while self.flight() < budget:
            self._transmit(self.snd_nxt, retransmit=self.snd_nxt < self._high_water)
            self.snd_nxt += 1
        if self.snd_nxt > self._high_water:
            self._high_water = self.snd_nxt
        self._ensure_timer()

    def _transmit(self, segno: int, retransmit: bool) -> None:
        t = self.loop.now()
        if retransmit:
            self.counters.retransmissions += 1
            self._retransmitted.add(segno)
        else:
            self._sent_at[segno] = t
        self.counters.segments_sent += 1
        self.submit_fn(self.cfg.sdu_bytes, t, segno)

    # -- ACK processing ---------------------------------------------------------

    def on_ack(self, ack_no: int) -> None:
        if ack_no > self.snd_una:
            self._on_new_ack(ack_no)
        elif ack_no == self.snd_una and self.snd_nxt > self.snd_una:
            self._on_dup_ack()
        # ACKs below snd_una are stale reordering artifacts: ignored.

    def _on_new_ack(self, ack_no: int) -> None:
        t = self.loop.now()
        newly = ack_no - self.snd_una
        sample_seg = ack_no - 1
        if sample_seg not in self._retransmitted and sample_seg in self._sent_at:
            self._update_rtt(t - self._sent_at[sample_seg])
        for seg in range(self.snd_una, ack_no):
            self._sent_at.pop(seg, None)
            self._retransmitted.discard(seg)
        self.snd_una = ack_no
        if self.snd_nxt < self.snd_una:  # cumulative ACK jumped past a go-back-N resend point
            self.snd_nxt = self.snd_una

        restart_timer = True
        if self.state == FAST_RECOVERY:
            if ack_no > self.recover:
                self.cwnd = self.ssthresh
                self.state = CONGESTION_AVOIDANCE
                self.dupacks = 0
            else:
                # Partial ACK: the next hole is already lost; retransmit and deflate.
                # The timer restarts only for the first partial ACK, so a recovery
                # with many holes escalates to RTO instead of crawling forever.
                self._transmit(ack_no, retransmit=True)
                self.cwnd = max(self.cwnd - newly + 1.0, 1.0)
                restart_timer = not self._partial_seen
                self._partial_seen = True
        else:
            self.dupacks = 0
            if self.state == SLOW_START:
                self.cwnd += 1.0
                if self.cwnd >= self.ssthresh:
                    self.state = CONGESTION_AVOIDANCE
            else:
                self.cwnd += 1.0 / self.cwnd
        if restart_timer:
            self._restart_timer()
        else:
            self._ensure_timer()
        self._send_window()

    def _on_dup_ack(self) -> None:
        self.dupacks += 1
        if self.state == FAST_RECOVERY:
            self.cwnd += 1.0  # window inflation per extra duplicate
            self._send_window()
        elif self.dupacks == 3:
            self.counters.fast_retransmits += 1
            self.ssthresh = max(self.flight() / 2.0, 2.0)
            self.recover = self.snd_nxt
            self.state = FAST_RECOVERY
            self._partial_seen = False
            self._transmit(self.snd_una, retransmit=True)
            self.cwnd = self.ssthresh + 3.0
            self._send_window()

    # -- retransmission timer ---------------------------------------------------

    def _update_rtt(self, sample_us: SimTime) -> None:
        r = float(sample_us)
        if self.srtt is None:
            self.srtt = r
            self.rttvar = r / 2.0
        else:
            self.rttvar = 0.75 * self.rttvar + 0.25 * abs(self.srtt - r)
            self.srtt = 0.875 * self.srtt + 0.125 * r
        rto = self.srtt + 4.0 * self.rttvar
        self.rto = int(min(max(rto, self.cfg.min_rto_us), self.cfg.max_rto_us))

    def _ensure_timer(self) -> None:
        if self._timer is None and self.flight() > 0:
            self._timer = self.loop.schedule_after(self.rto, self._on_rto, label="tcp-rto")

    def _restart_timer(self) -> None:
        self.loop.cancel(self._timer)
        self._timer = None
        self._ensure_timer()

    def _on_rto(self) -> None:
        self._timer = None
        self.counters.rto_events += 1
        self.ssthresh = max(self.flight() / 2.0, 2.0)
        self.cwnd = 1.0
        self.state = SLOW_START
        self.dupacks = 0
        self.rto = min(self.rto * 2, self.cfg.max_rto_us)
        # Go-back-N: rewind the send pointer; everything unacked is resent as the
        # window reopens (cumulative ACKs skip whatever the receiver holds).
        self.snd_nxt = self.snd_una
        self._send_window()


class TcpReceiver:
    """Cumulative-ACK receiver: one ACK per delivered segment, dup ACK on gap."""

    def __init__(self, ack_fn, collector, sdu_bytes: int):
        self.ack_fn = ack_fn  # ack_fn(ack_no, t)
        self.collector = collector
        self.sdu_bytes = sdu_bytes
        self.rcv_nxt = 0
        self._ooo: set[int] = set()

    def on_delivery(self, delivery) -> None:
        segno = delivery.pdu.payload
        t = delivery.delivered_at
        if segno == self.rcv_nxt:
            advanced = 1
            self.rcv_nxt += 1
            while self.rcv_nxt in self._ooo:
                self._ooo.discard(self.rcv_nxt)
                self.rcv_nxt += 1
                advanced += 1
            if self.collector is not None:
                self.collector.on_app_bytes(advanced * self.sdu_bytes, t)
        elif segno > self.rcv_nxt:
            self._ooo.add(segno)
        self.ack_fn(self.rcv_nxt, t)
