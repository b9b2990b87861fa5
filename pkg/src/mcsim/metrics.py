"""Run metrics: collection hooks, end-of-run accounting, CSV/JSON emission.

Goodput is measured at application delivery (post-reordering).  The
accounting partition assigns every submitted SDU to exactly one terminal
bucket at run end: delivered, residual in flight, stale-discarded,
declared-lost-and-gone, or dropped-without-declaration.  Floats in emitted
documents are rounded to 6 significant digits so CSV and JSON carry
identical values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .engine import SimTime, US_PER_S

METRICS_SCHEMA = "mcsim-metrics-v1"


def fmt6(x: float | None) -> float | None:
    """Round to 6 significant digits (the emission precision)."""
    if x is None:
        return None
    return float(f"{x:.6g}")


def relative_gain(metric_a: float, metric_b: float) -> float | None:
    """Percent by which a exceeds b; None when b == 0 (undefined)."""
    if metric_b == 0:
        return None
    return 100.0 * (metric_a - metric_b) / metric_b


def percentile(sorted_values: list, q: float):
    """Nearest-rank percentile over a pre-sorted list; None when empty."""
    if not sorted_values:
        return None
    n = len(sorted_values)
    rank = max(1, -(-int(q * n * 100) // 100))  # ceil(q*n) without float fuzz
    rank = min(rank, n)
    return sorted_values[rank - 1]


class MetricsCollector:
    """Live counters updated by simulation components during one run."""

    def __init__(self, duration_us: SimTime):
        self.duration_us = duration_us
        self.n_seconds = max(1, -(-duration_us // US_PER_S))
        # per-SDU records, indexed by COUNT (gap-free from the transmitter)
        self.copies: list[int] = []
        self.copies_dropped: list[int] = []
        self.copies_stale: list[int] = []
        self.copies_dup: list[int] = []
        self.delivered_flag: list[bool] = []
        self.declared_flag: list[bool] = []
        # scalars
        self.submitted = 0
        self.delivered = 0
        self.ooo_delivered = 0
        self.declared_lost = 0
        self.stale_discarded = 0
        self.duplicate_discarded = 0
        self.app_bytes = 0
        self._max_delivered_count = -1
        self.delays_us: list[int] = []
        # per-second buckets
        self.app_bytes_by_second = [0] * self.n_seconds
        self.path_sent_by_second: dict[str, list[int]] = {}
        self.queue_samples: dict[str, list[int]] = {}
        # reordering-buffer occupancy (time-weighted)
        self._buf_level = 0
        self._buf_last_t = 0
        self._buf_area = 0  # byte-microseconds
        self.reorder_buffer_max_bytes = 0

    # -- hooks -----------------------------------------------------------------

    def on_submit(self, count: int, size_bytes: int, n_copies: int, t: SimTime) -> None:
        assert count == len(self.copies), "COUNT assignment must be gap-free"
        self.copies.append(n_copies)
        self.copies_dropped.append(0)
        self.copies_stale.append(0)
        self.copies_dup.append(0)
        self.delivered_flag.append(False)
        self.declared_flag.append(False)
        self.submitted += 1

    def on_path_drop(self, pdu) -> None:
        self.copies_dropped[pdu.count] += 1

    def on_path_sent(self, path_id: str, nbytes: int, t: SimTime) -> None:
        buckets = self.path_sent_by_second.setdefault(path_id, [0] * self.n_seconds)
        buckets[self._second(t)] += nbytes

    def on_delivered(self, pdu, count: int, t: SimTime) -> None:
        delay = t - pdu.created_at
        if delay < 0:
            raise ValueError(f"delivery before creation for COUNT {count}")
        self.delivered += 1
        # terminal-state bookkeeping keys on the transmitter-assigned identity;
        # the receiver-recovered count only drives ordering metrics
        self.delivered_flag[pdu.count] = True
        # late-packet definition: a delivery sequenced below one already delivered
        if count < self._max_delivered_count:
            self.ooo_delivered += 1
        else:
            self._max_delivered_count = count
        self.delays_us.append(delay)

    def on_duplicate_discarded(self, pdu, t: SimTime) -> None:
        self.duplicate_discarded += 1
        self.copies_dup[pdu.count] += 1

    def on_stale_discarded(self, pdu, t: SimTime) -> None:
        self.stale_discarded += 1
        self.copies_stale[pdu.count] += 1

    def on_declared_lost(self, count: int) -> None:
        self.declared_lost += 1
        if 0 <= count < len(self.declared_flag):  # aliased SN recovery can exceed range
            self.declared_flag[count] = True

    def on_app_bytes(self, nbytes: int, t: SimTime) -> None:
        self.app_bytes += nbytes
        self.app_bytes_by_second[self._second(t)] += nbytes

    def on_reorder_buffer_level(self, level_bytes: int, t: SimTime) -> None:
        self._buf_area += self._buf_level * (t - self._buf_last_t)
        self._buf_level = level_bytes
        self._buf_last_t = t
        if level_bytes > self.reorder_buffer_max_bytes:
            self.reorder_buffer_max_bytes = level_bytes

    def on_queue_sample(self, path_id: str, queue_bytes: int) -> None:
        self.queue_samples.setdefault(path_id, []).append(queue_bytes)

    def _second(self, t: SimTime) -> int:
        return min(t // US_PER_S, self.n_seconds - 1)

    # -- finalization -----------------------------------------------------------

    def reorder_buffer_mean_bytes(self) -> float:
        area = self._buf_area + self._buf_level * (self.duration_us - self._buf_last_t)
        return area / self.duration_us if self.duration_us > 0 else 0.0

    def accounting(self, in_system_copies: int) -> dict:
        """Partition every submitted SDU into one terminal bucket (exact)."""
        delivered = residual = stale = declared_gone = dropped_undeclared = 0
        leak = False
        copies_seen = 0
        for c in range(self.submitted):
            in_system = (
                self.copies[c]
                - self.copies_dropped[c]
                - self.copies_stale[c]
                - self.copies_dup[c]
                - (1 if self.delivered_flag[c] else 0)
            )
            copies_seen += self.copies[c]
            if in_system < 0:
                leak = True
            if self.delivered_flag[c]:
                delivered += 1
            elif in_system > 0:
                residual += 1
            elif self.copies_stale[c] > 0:
                stale += 1
            elif self.declared_flag[c]:
                declared_gone += 1
            else:
                dropped_undeclared += 1
        total = delivered + residual + stale + declared_gone + dropped_undeclared
        copy_residual = (
            copies_seen
            - sum(self.copies_dropped)
            - sum(self.copies_stale)
            - sum(self.copies_dup)
            - self.delivered
        )
        return {
            "submitted": self.submitted,
            "delivered": delivered,
            "declared_lost_gone": declared_gone,
            "stale_discarded": stale,
            "path_dropped_undeclared": dropped_undeclared,
            "residual_in_flight": residual,
            "balanced": (not leak) and total == self.submitted and copy_residual == in_system_copies,
        }


@dataclass
class RunMetrics:
    """One run's emitted document: labels + aggregate totals + series."""

    labels: dict
    totals: dict
    accounting: dict
    engine: dict
    per_path: list
    per_second: list

    def to_doc(self) -> dict:
        return {
            "schema": METRICS_SCHEMA,
            "labels": self.labels,
            "totals": self.totals,
            "accounting": self.accounting,
            "engine": self.engine,
            "per_path": self.per_path,
            "per_second": self.per_second,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "RunMetrics":
        if doc.get("schema") != METRICS_SCHEMA:
            raise ValueError(f"unexpected metrics schema {doc.get('schema')!r}")
        return cls(
            labels=doc["labels"],
            totals=doc["totals"],
            accounting=doc["accounting"],
            engine=doc["engine"],
            per_path=doc["per_path"],
            per_second=doc["per_second"],
        )

    @property
    def goodput_bps(self) -> float:
        return self.totals["aggregate_goodput_bps"]


AGGREGATE_FIELDS = (
    "submitted_sdus",
    "delivered_sdus",
    "app_bytes",
    "aggregate_goodput_bps",
    "ooo_delivered",
    "declared_lost",
    "stale_discarded",
    "duplicate_discarded",
    "reorder_buffer_mean_bytes",
    "reorder_buffer_max_bytes",
    "delay_p50_ms",
    "delay_p95_ms",
    "delay_p99_ms",
    "tcp_retransmissions",
    "tcp_fast_retransmits",
    "tcp_rto_events",
)


def build_run_metrics(
    collector: MetricsCollector,
    labels: dict,
    path_stats: list,
    in_system_copies: int,
    tcp_counters=None,
    engine_stats: dict | None = None,
) -> RunMetrics:
    """Freeze collector state into the emitted document."""
    duration_s = collector.duration_us / US_PER_S
    delays = sorted(collector.delays_us)

    def p_ms(q: float):
        v = percentile(delays, q)
        return None if v is None else fmt6(v / 1000.0)

    totals = {
        "submitted_sdus": collector.submitted,
        "delivered_sdus": collector.delivered,
        "app_bytes": collector.app_bytes,
        "aggregate_goodput_bps": fmt6(
            collector.app_bytes * 8 / duration_s if duration_s > 0 else 0.0
        ),
        "ooo_delivered": collector.ooo_delivered,
        "declared_lost": collector.declared_lost,
        "stale_discarded": collector.stale_discarded,
        "duplicate_discarded": collector.duplicate_discarded,
        "reorder_buffer_mean_bytes": fmt6(collector.reorder_buffer_mean_bytes()),
        "reorder_buffer_max_bytes": collector.reorder_buffer_max_bytes,
        "delay_p50_ms": p_ms(0.50),
        "delay_p95_ms": p_ms(0.95),
        "delay_p99_ms": p_ms(0.99),
        "tcp_retransmissions": tcp_counters.retransmissions if tcp_counters else None,
        "tcp_fast_retransmits": tcp_counters.fast_retransmits if tcp_counters else None,
        "tcp_rto_events": tcp_counters.rto_events if tcp_counters else None,
    }
    per_second = []
    for sec in range(collector.n_seconds):
        row = {
            "second": sec,
            "app_goodput_bps": fmt6(collector.app_bytes_by_second[sec] * 8.0),
            "path_sent_bps": {
                ps["path_id"]: fmt6(
                    collector.path_sent_by_second.get(ps["path_id"], [0] * collector.n_seconds)[sec] * 8.0
                )
                for ps in path_stats
            },
            "path_queue_bytes": {
                ps["path_id"]: (
                    collector.queue_samples.get(ps["path_id"], [])[sec]
                    if sec < len(collector.queue_samples.get(ps["path_id"], []))
                    else 0
                )
                for ps in path_stats
            },
        }
        per_second.append(row)
    return RunMetrics(
        labels=labels,
        totals=totals,
        accounting=collector.accounting(in_system_copies),
        engine=engine_stats or {},
        per_path=path_stats,
        per_second=per_second,
    )


# -- emission ------------------------------------------------------------------


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def render_csv(metrics: RunMetrics) -> str:
    """One row per second plus one aggregate row; schema version header line."""
    path_ids = [p["path_id"] for p in metrics.per_path]
    header = (
        ["run_key", "row", "second", "app_goodput_bps"]
        + [f"sent_bps.{pid}" for pid in path_ids]
        + [f"queue_bytes.{pid}" for pid in path_ids]
        + list(AGGREGATE_FIELDS)
    )
    run_key = metrics.labels.get("run_key", "")
    lines = [f"# schema={METRICS_SCHEMA}", ",".join(header)]
    blank_aggregate = [""] * len(AGGREGATE_FIELDS)
    for row in metrics.per_second:
        cells = [run_key, "second", str(row["second"]), _csv_cell(row["app_goodput_bps"])]
        cells += [_csv_cell(row["path_sent_bps"][pid]) for pid in path_ids]
        cells += [_csv_cell(row["path_queue_bytes"][pid]) for pid in path_ids]
        cells += blank_aggregate
        lines.append(",".join(cells))
    if metrics.totals:
        aggregate = [run_key, "aggregate", "", ""] + [""] * (2 * len(path_ids))
        aggregate += [_csv_cell(metrics.totals[f]) for f in AGGREGATE_FIELDS]
        lines.append(",".join(aggregate))
    return "\n".join(lines) + "\n"


def render_json(metrics: RunMetrics) -> str:
    return json.dumps(metrics.to_doc(), indent=2) + "\n"


def emit(metrics: RunMetrics, fmt: str, path: str | Path) -> Path:
    """Write one run's metrics to path; I/O failures name the path."""
    path = Path(path)
    if fmt == "csv":
        text = render_csv(metrics)
    elif fmt == "json":
        text = render_json(metrics)
    else:
        raise ValueError(f"unknown metrics format {fmt!r}")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"failed to write metrics to {path}: {exc}") from exc
    return path


def parse_metrics_json(path: str | Path) -> RunMetrics:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return RunMetrics.from_doc(doc)
