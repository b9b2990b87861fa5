"""Per-second channel-quality traces and the CQI -> link-capacity mapping.

A trace is one CQI value (0..15) per second.  Capacity is piecewise-constant
within each second: the normalized efficiency ladder maps CQI to a fraction
of the path's configured peak rate, so a CQI-15 second runs at exactly
``peak_rate_bps``.  Traces shorter than a run wrap cyclically.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .engine import SimTime, US_PER_S
from .engine import RandomStreams

# Standard LTE 4-bit CQI spectral-efficiency ladder (entry 0 = out of range).
CQI_EFFICIENCY = (
    0.0,
    0.1523, 0.2344, 0.3770, 0.6016, 0.8770,
    1.1758, 1.4766, 1.9141, 2.4063, 2.7305,
    3.3223, 3.9023, 4.5234, 5.1152, 5.5547,
)

CQI_MAX = 15


class TraceError(ValueError):
    """Malformed trace file or trace data."""


@dataclass(frozen=True)
class CqiRateTable:
    """Monotone CQI -> rate-fraction table, normalized so entry 15 is 1.0."""

    efficiencies: tuple = CQI_EFFICIENCY

    def __post_init__(self):
        eff = self.efficiencies
        if len(eff) != CQI_MAX + 1 or eff[0] != 0.0:
            raise TraceError("rate table needs entries for CQI 0..15 with table[0] == 0")
        if any(eff[i] > eff[i + 1] for i in range(CQI_MAX)):
            raise TraceError("rate table must be monotone non-decreasing in CQI")

    def fraction(self, cqi: int) -> float:
        """Fraction of peak rate achieved at this CQI."""
        return self.efficiencies[cqi] / self.efficiencies[CQI_MAX]


DEFAULT_RATE_TABLE = CqiRateTable()


@dataclass
class ChannelTrace:
    """One CQI sample per second, seconds 0..len-1."""

    cqi_by_second: list[int]
    source_label: str = ""

    def __post_init__(self):
        if not self.cqi_by_second:
            raise TraceError("trace must contain at least one sample")
        for i, cqi in enumerate(self.cqi_by_second):
            if not 0 <= cqi <= CQI_MAX:
                raise TraceError(f"CQI {cqi} at second {i} outside [0, {CQI_MAX}]")

    def __len__(self) -> int:
        return len(self.cqi_by_second)

    def cqi_at(self, t: SimTime) -> int:
        """Sample for the second containing t, wrapping cyclically."""
        return self.cqi_by_second[(t // US_PER_S) % len(self.cqi_by_second)]

    def manifest(self) -> dict:
        samples = self.cqi_by_second
        return {
            "source_label": self.source_label,
            "seconds": len(samples),
            "cqi_min": min(samples),
            "cqi_max": max(samples),
            "cqi_mean": sum(samples) / len(samples),
        }


def rate_at(
    trace: ChannelTrace,
    table: CqiRateTable,
    peak_rate_bps: float,
    t: SimTime,
) -> float:
    """Instantaneous capacity in bit/s at time t (piecewise-constant per second)."""
    return peak_rate_bps * table.fraction(trace.cqi_at(t))


def mean_fraction(trace: ChannelTrace, table: CqiRateTable) -> float:
    """Average of the per-second rate fractions over one trace cycle."""
    return sum(table.fraction(c) for c in trace.cqi_by_second) / len(trace)


def load_trace(path: str | Path, source_label: str = "") -> ChannelTrace:
    """Parse a `second,cqi` CSV (header optional) into a validated trace.

    Seconds must be consecutive integers starting at 0.  Errors name the
    offending line.
    """
    path = Path(path)
    samples: list[int] = []
    expected_second = 0
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if lineno == 1 and line.lower().replace(" ", "") == "second,cqi":
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise TraceError(f"{path}:{lineno}: expected 'second,cqi', got {line!r}")
            try:
                second = int(parts[0])
                cqi = int(parts[1])
            except ValueError:
                raise TraceError(f"{path}:{lineno}: non-integer field in {line!r}") from None
            if second != expected_second:
                raise TraceError(
                    f"{path}:{lineno}: second index {second}, expected {expected_second} "
                    "(must be consecutive from 0)"
                )
            if not 0 <= cqi <= CQI_MAX:
                raise TraceError(f"{path}:{lineno}: CQI {cqi} outside [0, {CQI_MAX}]")
            samples.append(cqi)
            expected_second += 1
    if not samples:
        raise TraceError(f"{path}: trace file contains no samples")
    return ChannelTrace(samples, source_label=source_label or path.stem)


def render_trace(trace: ChannelTrace) -> str:
    """Canonical CSV form: header + one row per second, LF line endings."""
    lines = ["second,cqi"]
    lines.extend(f"{i},{cqi}" for i, cqi in enumerate(trace.cqi_by_second))
    return "\n".join(lines) + "\n"


def save_trace(trace: ChannelTrace, path: str | Path) -> None:
    Path(path).write_text(render_trace(trace), encoding="utf-8")


def generate_trace(
    seed: int,
    duration_s: int,
    cqi_min: int = 8,
    cqi_max: int = CQI_MAX,
    start: int | None = None,
    source_label: str = "",
) -> ChannelTrace:
    """Seeded random-walk CQI trace (pedestrian-like: +/-1 step per second)."""
    if not 0 <= cqi_min <= cqi_max <= CQI_MAX:
        raise TraceError(f"invalid CQI band [{cqi_min}, {cqi_max}]")
    if duration_s < 1:
        raise TraceError("duration_s must be >= 1")
    rng = RandomStreams(seed).stream("cqi-walk")
    cqi = start if start is not None else (cqi_min + cqi_max + 1) // 2
    if not cqi_min <= cqi <= cqi_max:
        raise TraceError(f"start CQI {cqi} outside band [{cqi_min}, {cqi_max}]")
    samples = []
    for _ in range(duration_s):
        samples.append(cqi)
        cqi = min(cqi_max, max(cqi_min, cqi + rng.choice((-1, 0, 1))))
    return ChannelTrace(samples, source_label=source_label or f"walk-seed{seed}")
