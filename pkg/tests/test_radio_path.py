import random

import pytest

from mcsim.engine import EventLoop, US_PER_S, ms
from mcsim.pdcp_tx import PdcpPdu
from mcsim.radio_path import PathConfig, PathStats, PathTx
from mcsim.trace import ChannelTrace


def make_path(loop, rate_bps=12e6, cqi=None, seed=1, deliveries=None, **cfg_kwargs):
    trace = ChannelTrace(cqi if cqi is not None else [15])
    peak = cfg_kwargs.pop("peak_rate_bps", rate_bps)
    cfg = PathConfig(path_id="A", trace=trace, peak_rate_bps=peak, **cfg_kwargs)
    sink = deliveries if deliveries is not None else []
    path = PathTx(loop, cfg, random.Random(seed), lambda pdu, t: sink.append((pdu, t)))
    return path, sink


def pdu(count, size=1500, created_at=0):
    return PdcpPdu(count=count, sn=count, sdu_id=count, size_bytes=size, created_at=created_at)


def test_serialization_time_arithmetic():
    # 1500 B at 12 Mb/s -> 1000 us, plus 5 ms propagation
    loop = EventLoop()
    path, got = make_path(loop, rate_bps=12e6, prop_delay_us=ms(5))
    assert path.enqueue(pdu(0), 0)
    loop.run_until(US_PER_S)
    assert len(got) == 1
    assert got[0][1] == 1000 + ms(5)


def test_backhaul_delays_first_bit():
    # secondary path: serialization starts no earlier than t + 10 ms
    loop = EventLoop()
    path, got = make_path(loop, rate_bps=12e6, backhaul_delay_us=ms(10), prop_delay_us=0)
    path.enqueue(pdu(0), 0)
    loop.run_until(US_PER_S)
    assert got[0][1] == ms(10) + 1000


def test_anchor_path_serializes_immediately():
    loop = EventLoop()
    path, got = make_path(loop, rate_bps=12e6, prop_delay_us=0)
    path.enqueue(pdu(0), 0)
    loop.run_until(US_PER_S)
    assert got[0][1] == 1000


def test_queue_overflow_dropped_and_counted():
    loop = EventLoop()
    path, _ = make_path(loop, rate_bps=1e6, queue_limit_bytes=3000)
    assert path.enqueue(pdu(0), 0) is True
    assert path.enqueue(pdu(1), 0) is True
    assert path.enqueue(pdu(2), 0) is False  # 1500 more would exceed 3000
    assert path.stats.dropped_overflow == 1
    assert path.stats.enqueued == 2


def test_loss_prob_one_drops_everything():
    loop = EventLoop()
    path, got = make_path(loop, rate_bps=12e6, loss_prob=1.0)
    for i in range(10):
        path.enqueue(pdu(i), 0)
    loop.run_until(US_PER_S)
    assert got == []
    assert path.stats.dropped_loss == 10
    assert path.stats.dequeued == 10


def test_fifo_order_preserved():
    loop = EventLoop()
    path, got = make_path(loop, rate_bps=12e6)
    for i in range(20):
        path.enqueue(pdu(i), 0)
    loop.run_until(US_PER_S)
    assert [p.count for p, _ in got] == list(range(20))


def test_zero_rate_second_stalls_until_next_nonzero_second():
    loop = EventLoop()
    path, got = make_path(loop, cqi=[0, 15], peak_rate_bps=12e6, prop_delay_us=0)
    path.enqueue(pdu(0), 0)
    loop.run_until(2 * US_PER_S)
    # departure deferred to the CQI-15 second starting at t=1s
    assert got[0][1] == US_PER_S + 1000


def test_long_zero_gap_stalls_multiple_seconds():
    loop = EventLoop()
    path, got = make_path(loop, cqi=[0, 0, 0, 15], peak_rate_bps=12e6, prop_delay_us=0)
    path.enqueue(pdu(0), 0)
    loop.run_until(4 * US_PER_S)
    assert got[0][1] == 3 * US_PER_S + 1000


def test_work_conservation_throughput_matches_capacity():
    # saturated queue: delivered bytes over [0,T] within one PDU of integral(rate)/8
    loop = EventLoop()
    path, got = make_path(loop, cqi=[15, 8, 12], peak_rate_bps=12e6, prop_delay_us=0,
                          queue_limit_bytes=10**9)
    for i in range(5000):
        path.enqueue(pdu(i, size=1400), 0)
    loop.run_until(3 * US_PER_S)
    from mcsim.trace import DEFAULT_RATE_TABLE, rate_at

    capacity_bits = sum(
        rate_at(path.cfg.trace, DEFAULT_RATE_TABLE, 12e6, s * US_PER_S) for s in range(3)
    )
    delivered_bits = sum(p.size_bytes for p, _ in got) * 8
    assert delivered_bits <= capacity_bits + 1400 * 8
    assert delivered_bits >= capacity_bits * 0.995 - 1400 * 8


def test_lossless_infinite_queue_delivers_everything():
    loop = EventLoop()
    path, got = make_path(loop, rate_bps=50e6, queue_limit_bytes=10**9)
    n = 1000
    for i in range(n):
        path.enqueue(pdu(i, size=1400), 0)
    loop.run_until(5 * US_PER_S)
    assert len(got) == n
    assert path.stats.enqueued == n
    assert path.stats.dequeued == n


def test_stats_conservation_identity():
    loop = EventLoop()
    path, got = make_path(loop, rate_bps=2e6, queue_limit_bytes=30000, loss_prob=0.3, seed=5)
    for i in range(200):
        path.enqueue(pdu(i, size=1400), 0)
    loop.run_until(US_PER_S // 2)  # stop mid-flight
    s = path.stats
    attempts = s.enqueued + s.dropped_overflow
    assert attempts == 200
    assert s.enqueued == s.dequeued + (path.residual_pdus() - path._in_prop_flight)
    assert s.dequeued == s.dropped_loss + len(got) + path._in_prop_flight


def test_invalid_config_rejected():
    trace = ChannelTrace([15])
    with pytest.raises(ValueError):
        PathConfig(path_id="A", trace=trace, peak_rate_bps=1e6, loss_prob=1.5)
    with pytest.raises(ValueError):
        PathConfig(path_id="A", trace=trace, peak_rate_bps=1e6, backhaul_delay_us=-1)


def test_path_stats_defaults():
    s = PathStats()
    assert (s.enqueued, s.dequeued, s.dropped_overflow, s.dropped_loss, s.bytes_sent) == (
        0, 0, 0, 0, 0,
    )
