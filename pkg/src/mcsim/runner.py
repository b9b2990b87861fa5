"""Scenario runner and experiment-matrix executor.

`run_scenario` wires one validated config into a fresh event loop, runs it to
completion, and freezes the metrics document.  `run_matrix` executes expanded
runs as independent instances (optionally in parallel worker processes);
outputs are invariant to the parallelism degree because runs share nothing.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass
from pathlib import Path

from .config import ExperimentMatrix, ScenarioConfig, expand_matrix
from .engine import EventLoop, RandomStreams, US_PER_S, ms, seconds
from .metrics import MetricsCollector, RunMetrics, build_run_metrics, emit
from .pdcp_rx import PdcpReceiver
from .pdcp_tx import PdcpTransmitter
from .radio_path import PathConfig, PathTx
from .transport import TcpConfig, TcpReceiver, TcpSender, UdpSink, UdpSource


@dataclass
class RunResult:
    run_key: str
    ok: bool
    metrics: RunMetrics | None = None
    error: str | None = None


def run_scenario(cfg: ScenarioConfig) -> RunMetrics:
    """Execute one deterministic simulation end-to-end."""
    loop = EventLoop()
    streams = RandomStreams(cfg.seed)
    duration_us = seconds(cfg.duration_s)
    collector = MetricsCollector(duration_us)

    receiver = PdcpReceiver(
        loop,
        sn_len=cfg.sn_len,
        t_reordering_us=ms(cfg.t_reordering_ms) if cfg.t_reordering_ms is not None else 0,
        reordering_enabled=cfg.reordering,
        collector=collector,
    )

    paths = []
    for spec in cfg.paths:
        path_cfg = PathConfig(
            path_id=spec.path_id,
            trace=spec.load_channel_trace(),
            peak_rate_bps=spec.peak_rate_bps,
            backhaul_delay_us=ms(spec.backhaul_delay_ms),
            prop_delay_us=ms(spec.prop_delay_ms),
            queue_limit_bytes=spec.queue_limit_bytes,
            loss_prob=spec.loss_prob,
        )
        paths.append(
            PathTx(
                loop,
                path_cfg,
                loss_rng=streams.stream(f"loss.{spec.path_id}"),
                deliver_fn=receiver.receive,
                collector=collector,
            )
        )

    tx = PdcpTransmitter(paths, cfg.policy, sn_len=cfg.sn_len, collector=collector)

    tcp_counters = None
    if cfg.traffic.kind == "udp":
        sink = UdpSink(collector)
        receiver.deliver_fn = sink.on_delivery
        source = UdpSource(
            loop,
            tx.submit_sdu,
            rate_bps=cfg.traffic.udp_rate_mbps * 1e6,
            sdu_bytes=cfg.traffic.sdu_bytes,
            duration_us=duration_us,
        )
        source.start()
    else:
        tcp_cfg = TcpConfig(
            sdu_bytes=cfg.traffic.sdu_bytes,
            uplink_delay_us=ms(cfg.traffic.uplink_delay_ms),
        )
        sender = TcpSender(loop, tx.submit_sdu, tcp_cfg)
        tcp_counters = sender.counters

        def send_ack(ack_no, t):
            loop.schedule_at(
                t + tcp_cfg.uplink_delay_us, lambda: sender.on_ack(ack_no), label="tcp-ack"
            )

        tcp_rx = TcpReceiver(send_ack, collector, cfg.traffic.sdu_bytes)
        receiver.deliver_fn = tcp_rx.on_delivery
        loop.schedule_at(0, sender.start, label="tcp-start")

    def sample_queues():
        for p in paths:
            collector.on_queue_sample(p.path_id, p.flow_control_queue_bytes())

    for sec in range(collector.n_seconds):
        loop.schedule_at(sec * US_PER_S, sample_queues, label="queue-sample")

    if cfg.feedback_delay_ms > 0:
        interval = ms(cfg.feedback_delay_ms)

        def refresh():
            tx.refresh_snapshot_cache()
            if loop.now() + interval <= duration_us:
                loop.schedule_after(interval, refresh, label="fc-feedback")

        loop.schedule_at(0, refresh, label="fc-feedback")

    summary = loop.run_until(duration_us)

    path_stats = [
        {
            "path_id": p.path_id,
            "enqueued": p.stats.enqueued,
            "dequeued": p.stats.dequeued,
            "dropped_overflow": p.stats.dropped_overflow,
            "dropped_loss": p.stats.dropped_loss,
            "bytes_sent": p.stats.bytes_sent,
            "residual_pdus": p.residual_pdus(),
        }
        for p in paths
    ]
    in_system = sum(p.residual_pdus() for p in paths) + receiver.buffer_occupancy()[1]
    labels = {
        "run_key": cfg.name,
        "mode": cfg.mode,
        "policy": cfg.policy,
        "policy_class": tx.policy.policy_class,
        "traffic": cfg.traffic.kind,
        "t_reordering_ms": cfg.t_reordering_ms,
        "seed": cfg.seed,
        "duration_s": cfg.duration_s,
        "sn_len": cfg.sn_len,
    }
    engine_stats = {
        "events_processed": summary.events_processed,
        "scheduled_total": loop.scheduled_total,
        "cancelled_total": loop.cancelled_total,
        "pending_at_end": loop.pending_count(),
    }
    return build_run_metrics(
        collector,
        labels,
        path_stats,
        in_system_copies=in_system,
        tcp_counters=tcp_counters,
        engine_stats=engine_stats,
    )


def _run_entry(entry: tuple[str, ScenarioConfig]) -> RunResult:
    run_key, cfg = entry
    try:
        return RunResult(run_key=run_key, ok=True, metrics=run_scenario(cfg))
    except Exception as exc:  # per-run failures recorded; other runs proceed
        return RunResult(run_key=run_key, ok=False, error=f"{type(exc).__name__}: {exc}")


def run_matrix(matrix: ExperimentMatrix, parallelism: int = 1) -> list[RunResult]:
    """Run every expanded scenario; result order matches expansion order."""
    entries = expand_matrix(matrix)
    if parallelism <= 1 or len(entries) <= 1:
        return [_run_entry(e) for e in entries]
    with concurrent.futures.ProcessPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(_run_entry, entries))


SUMMARY_FIELDS = (
    "mode", "policy", "traffic", "t_reordering_ms", "seed",
    "aggregate_goodput_bps", "submitted_sdus", "delivered_sdus",
    "ooo_delivered", "declared_lost", "stale_discarded", "duplicate_discarded",
    "reorder_buffer_mean_bytes", "tcp_retransmissions", "tcp_fast_retransmits",
    "tcp_rto_events",
)


def render_summary_csv(results: list[RunResult]) -> str:
    from .metrics import _csv_cell

    lines = ["run_key,ok," + ",".join(SUMMARY_FIELDS) + ",error"]
    for res in results:
        cells = [res.run_key, "true" if res.ok else "false"]
        if res.ok and res.metrics is not None:
            merged = {**res.metrics.labels, **res.metrics.totals}
            cells += [_csv_cell(merged.get(f)) for f in SUMMARY_FIELDS]
            cells.append("")
        else:
            cells += [""] * len(SUMMARY_FIELDS)
            cells.append((res.error or "").replace(",", ";"))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def safe_filename(key: str) -> str:
    return "".join(ch if (ch.isalnum() or ch in "-_.") else "-" for ch in key)


def write_run_outputs(metrics: RunMetrics, out_dir: str | Path, fmt: str = "both") -> list[Path]:
    out_dir = Path(out_dir)
    stem = safe_filename(metrics.labels.get("run_key", "run"))
    written = []
    if fmt in ("csv", "both"):
        written.append(emit(metrics, "csv", out_dir / f"{stem}.metrics.csv"))
    if fmt in ("json", "both"):
        written.append(emit(metrics, "json", out_dir / f"{stem}.metrics.json"))
    return written


def write_matrix_outputs(
    results: list[RunResult], out_dir: str | Path, fmt: str = "both"
) -> list[Path]:
    out_dir = Path(out_dir)
    written = []
    for res in results:
        if res.ok and res.metrics is not None:
            written.extend(write_run_outputs(res.metrics, out_dir, fmt))
    summary_path = out_dir / "summary.csv"
    summary_path.parent.mkdir(parents=True, exist_ok=True)
    summary_path.write_text(render_summary_csv(results), encoding="utf-8")
    written.append(summary_path)
    return written
