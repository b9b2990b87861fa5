"""Scenario configuration: JSON schema, validation, and matrix expansion.

A scenario file fully describes one reproducible run (mode, paths, timer,
traffic, duration, seed).  A matrix file holds a base scenario plus named
variants and value axes; expansion is the cartesian product of axes applied
on top of each variant.  Every expanded run gets a unique key.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

from .pdcp_tx import POLICIES, SN_LENGTHS
from .trace import ChannelTrace, load_trace

MODES = ("SC", "DC_NoR", "DC_Reo", "DC_Dup")
TRAFFIC_KINDS = ("udp", "tcp")
SCENARIO_SCHEMA = "mcsim-scenario-v1"
MATRIX_SCHEMA = "mcsim-matrix-v1"

DEFAULT_SDU_BYTES = 1400
DEFAULT_QUEUE_LIMIT_PDUS = 500
DEFAULT_SECONDARY_BACKHAUL_MS = 10.0
DEFAULT_PROP_DELAY_MS = 5.0
DEFAULT_UPLINK_DELAY_MS = 5.0


class ConfigError(ValueError):
    """Invalid configuration; message carries the offending key path."""

    def __init__(self, key_path: str, message: str):
        self.key_path = key_path
        super().__init__(f"{key_path}: {message}" if key_path else message)


@dataclass
class PathSpec:
    path_id: str
    peak_rate_bps: float
    trace_file: str | None = None          # resolved absolute path
    trace_cqi: list[int] | None = None     # inline alternative to a file
    backhaul_delay_ms: float = 0.0
    prop_delay_ms: float = DEFAULT_PROP_DELAY_MS
    queue_limit_bytes: int = 0             # 0 -> default applied at parse
    loss_prob: float = 0.0

    def load_channel_trace(self) -> ChannelTrace:
        if self.trace_cqi is not None:
            return ChannelTrace(list(self.trace_cqi), source_label=self.path_id)
        return load_trace(self.trace_file, source_label=self.path_id)


@dataclass
class TrafficSpec:
    kind: str
    udp_rate_mbps: float = 0.0
    sdu_bytes: int = DEFAULT_SDU_BYTES
    uplink_delay_ms: float = DEFAULT_UPLINK_DELAY_MS


@dataclass
class OutputSpec:
    dir: str = "out"
    format: str = "both"  # csv | json | both


@dataclass
class ScenarioConfig:
    name: str
    mode: str
    seed: int
    paths: list[PathSpec]
    traffic: TrafficSpec
    duration_s: float = 30.0
    sn_len: int = 12
    reordering: bool = False
    t_reordering_ms: float | None = None
    policy: str = "round_robin"
    feedback_delay_ms: float = 0.0
    output: OutputSpec = field(default_factory=OutputSpec)

    def to_doc(self) -> dict:
        """Canonical external document; parse_config(to_doc()) round-trips."""
        paths = []
        for p in self.paths:
            paths.append(
                {
                    "path_id": p.path_id,
                    "peak_rate_bps": p.peak_rate_bps,
                    "trace": p.trace_cqi if p.trace_cqi is not None else p.trace_file,
                    "backhaul_delay_ms": p.backhaul_delay_ms,
                    "prop_delay_ms": p.prop_delay_ms,
                    "queue_limit_bytes": p.queue_limit_bytes,
                    "loss_prob": p.loss_prob,
                }
            )
        doc = {
            "schema": SCENARIO_SCHEMA,
            "name": self.name,
            "mode": self.mode,
            "seed": self.seed,
            "duration_s": self.duration_s,
            "sn_len": self.sn_len,
            "reordering": "on" if self.reordering else "off",
            "policy": self.policy,
            "feedback_delay_ms": self.feedback_delay_ms,
            "traffic": {
                "kind": self.traffic.kind,
                "udp_rate_mbps": self.traffic.udp_rate_mbps,
                "sdu_bytes": self.traffic.sdu_bytes,
                "uplink_delay_ms": self.traffic.uplink_delay_ms,
            },
            "paths": paths,
            "output": {"dir": self.output.dir, "format": self.output.format},
        }
        if self.t_reordering_ms is not None:
            doc["t_reordering_ms"] = self.t_reordering_ms
        return doc


def _require(doc: dict, key: str, where: str):
    if key not in doc:
        raise ConfigError(f"{where}{key}" if not where else f"{where}.{key}", "missing required key")
    return doc[key]


def _check_unknown(doc: dict, allowed: set, where: str) -> None:
    for key in doc:
        if key not in allowed:
            raise ConfigError(f"{where}.{key}" if where else key, "unknown key")


def _parse_path(doc: dict, idx: int, base_dir: Path, sdu_bytes: int, is_anchor: bool) -> PathSpec:
    where = f"paths[{idx}]"
    if not isinstance(doc, dict):
        raise ConfigError(where, "path entry must be an object")
    allowed = {
        "path_id", "peak_rate_bps", "trace", "backhaul_delay_ms",
        "prop_delay_ms", "queue_limit_bytes", "loss_prob",
    }
    _check_unknown(doc, allowed, where)
    path_id = _require(doc, "path_id", where)
    if not isinstance(path_id, str) or not path_id:
        raise ConfigError(f"{where}.path_id", "must be a non-empty string")
    peak = _require(doc, "peak_rate_bps", where)
    if not isinstance(peak, (int, float)) or peak <= 0:
        raise ConfigError(f"{where}.peak_rate_bps", "must be a positive number")
    trace = _require(doc, "trace", where)
    trace_file = None
    trace_cqi = None
    if isinstance(trace, str):
        resolved = Path(trace)
        if not resolved.is_absolute():
            resolved = base_dir / resolved
        if not resolved.exists():
            raise ConfigError(f"{where}.trace", f"trace file not found: {resolved}")
        trace_file = str(resolved)
    elif isinstance(trace, list) and trace and all(isinstance(c, int) for c in trace):
        trace_cqi = list(trace)
    else:
        raise ConfigError(f"{where}.trace", "must be a CSV file path or a list of CQI integers")

    backhaul = doc.get("backhaul_delay_ms", 0.0 if is_anchor else DEFAULT_SECONDARY_BACKHAUL_MS)
    if not isinstance(backhaul, (int, float)) or backhaul < 0:
        raise ConfigError(f"{where}.backhaul_delay_ms", "must be a non-negative number")
    if is_anchor and backhaul != 0:
        raise ConfigError(f"{where}.backhaul_delay_ms", "anchor path must have backhaul delay 0")

    prop = doc.get("prop_delay_ms", DEFAULT_PROP_DELAY_MS)
    if not isinstance(prop, (int, float)) or prop < 0:
        raise ConfigError(f"{where}.prop_delay_ms", "must be a non-negative number")

    queue_limit = doc.get("queue_limit_bytes", DEFAULT_QUEUE_LIMIT_PDUS * sdu_bytes)
    if not isinstance(queue_limit, int) or queue_limit <= sdu_bytes:
        raise ConfigError(f"{where}.queue_limit_bytes", "must exceed the SDU size")

    loss = doc.get("loss_prob", 0.0)
    if not isinstance(loss, (int, float)) or not 0.0 <= loss <= 1.0:
        raise ConfigError(f"{where}.loss_prob", "must be a probability in [0, 1]")

    spec = PathSpec(
        path_id=path_id,
        peak_rate_bps=float(peak),
        trace_file=trace_file,
        trace_cqi=trace_cqi,
        backhaul_delay_ms=float(backhaul),
        prop_delay_ms=float(prop),
        queue_limit_bytes=queue_limit,
        loss_prob=float(loss),
    )
    if trace_cqi is not None:
        spec.load_channel_trace()  # validates CQI range eagerly
    return spec


def _parse_traffic(doc: dict) -> TrafficSpec:
    where = "traffic"
    if not isinstance(doc, dict):
        raise ConfigError(where, "traffic must be an object")
    allowed = {"kind", "udp_rate_mbps", "sdu_bytes", "uplink_delay_ms"}
    _check_unknown(doc, allowed, where)
    kind = _require(doc, "kind", where)
    if kind not in TRAFFIC_KINDS:
        raise ConfigError(f"{where}.kind", f"must be one of {TRAFFIC_KINDS}")
    sdu_bytes = doc.get("sdu_bytes", DEFAULT_SDU_BYTES)
    if not isinstance(sdu_bytes, int) or sdu_bytes <= 0:
        raise ConfigError(f"{where}.sdu_bytes", "must be a positive integer")
    rate = doc.get("udp_rate_mbps", 0.0)
    if kind == "udp":
        if "udp_rate_mbps" not in doc:
            raise ConfigError(f"{where}.udp_rate_mbps", "required for UDP traffic")
        if not isinstance(rate, (int, float)) or rate < 0:
            raise ConfigError(f"{where}.udp_rate_mbps", "must be a non-negative number")
    uplink = doc.get("uplink_delay_ms", DEFAULT_UPLINK_DELAY_MS)
    if not isinstance(uplink, (int, float)) or uplink < 0:
        raise ConfigError(f"{where}.uplink_delay_ms", "must be a non-negative number")
    return TrafficSpec(
        kind=kind,
        udp_rate_mbps=float(rate),
        sdu_bytes=sdu_bytes,
        uplink_delay_ms=float(uplink),
    )


def parse_config(doc: dict, base_dir: str | Path = ".", name: str = "") -> ScenarioConfig:
    """Validate a scenario document and apply defaults; errors carry key paths."""
    if not isinstance(doc, dict):
        raise ConfigError("", "scenario must be a JSON object")
    base_dir = Path(base_dir)
    allowed = {
        "schema", "name", "mode", "seed", "duration_s", "sn_len", "reordering",
        "t_reordering_ms", "policy", "feedback_delay_ms", "paths", "traffic", "output",
    }
    _check_unknown(doc, allowed, "")
    if "schema" in doc and doc["schema"] != SCENARIO_SCHEMA:
        raise ConfigError("schema", f"expected {SCENARIO_SCHEMA!r}")

    mode = _require(doc, "mode", "")
    if mode not in MODES:
        raise ConfigError("mode", f"must be one of {MODES}")
    seed = _require(doc, "seed", "")
    if not isinstance(seed, int):
        raise ConfigError("seed", "must be an integer")

    duration_s = doc.get("duration_s", 30.0)
    if not isinstance(duration_s, (int, float)) or duration_s <= 0:
        raise ConfigError("duration_s", "must be a positive number")

    sn_len = doc.get("sn_len", 12)
    if sn_len not in SN_LENGTHS:
        raise ConfigError("sn_len", f"must be one of {SN_LENGTHS}")

    traffic = _parse_traffic(_require(doc, "traffic", ""))

    paths_doc = _require(doc, "paths", "")
    if not isinstance(paths_doc, list) or not paths_doc:
        raise ConfigError("paths", "must be a non-empty list")
    paths = [
        _parse_path(p, i, base_dir, traffic.sdu_bytes, is_anchor=(i == 0))
        for i, p in enumerate(paths_doc)
    ]
    ids = [p.path_id for p in paths]
    if len(set(ids)) != len(ids):
        raise ConfigError("paths", f"path_id values must be unique, got {ids}")

    if mode == "SC" and len(paths) != 1:
        raise ConfigError("paths", "SC mode requires exactly 1 path")
    if mode != "SC" and len(paths) < 2:
        raise ConfigError("paths", f"{mode} mode requires at least 2 paths")

    default_reordering = mode in ("DC_Reo", "DC_Dup")
    reordering_doc = doc.get("reordering", "on" if default_reordering else "off")
    if reordering_doc not in ("on", "off", True, False):
        raise ConfigError("reordering", "must be 'on' or 'off'")
    reordering = reordering_doc in ("on", True)
    if mode == "DC_NoR" and reordering:
        raise ConfigError("reordering", "DC_NoR requires reordering off")
    if mode in ("DC_Reo", "DC_Dup") and not reordering:
        raise ConfigError("reordering", f"{mode} requires reordering on")

    policy = doc.get("policy", "duplicate" if mode == "DC_Dup" else "round_robin")
    if policy not in POLICIES:
        raise ConfigError("policy", f"must be one of {tuple(POLICIES)}")
    if mode == "DC_Dup" and policy != "duplicate":
        raise ConfigError("policy", "DC_Dup requires policy 'duplicate'")
    if mode != "DC_Dup" and policy == "duplicate":
        raise ConfigError("policy", "policy 'duplicate' is only valid in DC_Dup mode")

    t_reordering_ms = doc.get("t_reordering_ms")
    if reordering:
        if t_reordering_ms is None:
            raise ConfigError("t_reordering_ms", "required when reordering is on")
        if not isinstance(t_reordering_ms, (int, float)) or t_reordering_ms < 0:
            raise ConfigError("t_reordering_ms", "must be a non-negative number")
        t_reordering_ms = float(t_reordering_ms)
    else:
        t_reordering_ms = None

    feedback = doc.get("feedback_delay_ms", 0.0)
    if not isinstance(feedback, (int, float)) or feedback < 0:
        raise ConfigError("feedback_delay_ms", "must be a non-negative number")

    output_doc = doc.get("output", {})
    if not isinstance(output_doc, dict):
        raise ConfigError("output", "must be an object")
    _check_unknown(output_doc, {"dir", "format"}, "output")
    out_format = output_doc.get("format", "both")
    if out_format not in ("csv", "json", "both"):
        raise ConfigError("output.format", "must be csv, json, or both")
    output = OutputSpec(dir=output_doc.get("dir", "out"), format=out_format)

    return ScenarioConfig(
        name=doc.get("name", name or mode),
        mode=mode,
        seed=seed,
        paths=paths,
        traffic=traffic,
        duration_s=float(duration_s),
        sn_len=sn_len,
        reordering=reordering,
        t_reordering_ms=t_reordering_ms,
        policy=policy,
        feedback_delay_ms=float(feedback),
        output=output,
    )


def load_config_file(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    doc = json.loads(path.read_text(encoding="utf-8"))
    return parse_config(doc, base_dir=path.parent, name=path.stem)


# -- experiment matrix ----------------------------------------------------------


@dataclass
class ExperimentMatrix:
    base: dict
    variants: list
    axes: dict
    base_dir: str = "."


def parse_matrix(doc: dict, base_dir: str | Path = ".") -> ExperimentMatrix:
    if not isinstance(doc, dict):
        raise ConfigError("", "matrix must be a JSON object")
    _check_unknown(doc, {"schema", "base", "variants", "axes"}, "")
    if "schema" in doc and doc["schema"] != MATRIX_SCHEMA:
        raise ConfigError("schema", f"expected {MATRIX_SCHEMA!r}")
    base = _require(doc, "base", "")
    if not isinstance(base, dict):
        raise ConfigError("base", "must be a scenario object")
    variants = doc.get("variants", [{"name": "base", "overrides": {}}])
    if not isinstance(variants, list) or not variants:
        raise ConfigError("variants", "must be a non-empty list")
    for i, v in enumerate(variants):
        if not isinstance(v, dict) or "name" not in v:
            raise ConfigError(f"variants[{i}]", "must be an object with a 'name'")
        _check_unknown(v, {"name", "overrides"}, f"variants[{i}]")
    names = [v["name"] for v in variants]
    if len(set(names)) != len(names):
        raise ConfigError("variants", f"variant names must be unique, got {names}")
    axes = doc.get("axes", {})
    if not isinstance(axes, dict):
        raise ConfigError("axes", "must be an object of key -> value list")
    for key, values in axes.items():
        if not isinstance(values, list) or not values:
            raise ConfigError(f"axes.{key}", "must be a non-empty list of values")
    return ExperimentMatrix(base=base, variants=variants, axes=axes, base_dir=str(base_dir))


def load_matrix_file(path: str | Path) -> ExperimentMatrix:
    path = Path(path)
    doc = json.loads(path.read_text(encoding="utf-8"))
    return parse_matrix(doc, base_dir=path.parent)


def _set_dotted(doc: dict, dotted: str, value) -> None:
    parts = dotted.split(".")
    node = doc
    for part in parts[:-1]:
        if part not in node or not isinstance(node[part], dict):
            node[part] = {}
        node = node[part]
    node[parts[-1]] = copy.deepcopy(value)


def _key_token(value) -> str:
    text = str(value)
    return "".join(ch if (ch.isalnum() or ch in "-_.") else "-" for ch in text)


def expand_matrix(matrix: ExperimentMatrix) -> list[tuple[str, ScenarioConfig]]:
    """Cartesian expansion: every variant under every axis-value combination."""
    axis_keys = list(matrix.axes.keys())
    combos: list[list[tuple[str, object]]] = [[]]
    for key in axis_keys:
        combos = [combo + [(key, value)] for combo in combos for value in matrix.axes[key]]

    runs: list[tuple[str, ScenarioConfig]] = []
    seen = set()
    for variant in matrix.variants:
        for combo in combos:
            doc = copy.deepcopy(matrix.base)
            for dotted, value in variant.get("overrides", {}).items():
                _set_dotted(doc, dotted, value)
            for dotted, value in combo:
                _set_dotted(doc, dotted, value)
            key = variant["name"]
            for dotted, value in combo:
                key += f"__{dotted.split('.')[-1]}-{_key_token(value)}"
            if key in seen:
                raise ConfigError("axes", f"duplicate run key {key!r}")
            seen.add(key)
            doc["name"] = key
            runs.append((key, parse_config(doc, base_dir=matrix.base_dir, name=key)))
    return runs
