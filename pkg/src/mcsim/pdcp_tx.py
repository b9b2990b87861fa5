"""PDCP transmitter at the anchor: sequence numbering and path selection.

Every submitted SDU gets the next COUNT (gap-free, strictly increasing);
the flow-control policy only chooses which path(s) carry the PDU, never the
numbering.  Duplication stamps the same COUNT on one copy per path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .engine import SimTime

SN_LENGTHS = (7, 12, 15, 18)

DRAIN_RATE_FLOOR_BPS = 1.0  # epsilon so a zero-rate path estimates as worst


@dataclass
class PdcpPdu:
    """Sequenced data unit.  COUNT = hfn * 2^sn_len + sn; sn is what the wire carries."""

    count: int
    sn: int
    sdu_id: int
    size_bytes: int
    created_at: SimTime
    path_id: str = ""
    payload: object = None  # opaque upper-layer tag (e.g. TCP segment number)


@dataclass(frozen=True)
class PathSnapshot:
    """Transmitter-side view of one path used by queue-aware flow control."""

    path_id: str
    queue_bytes: int
    rate_bps: float


@dataclass(frozen=True)
class FlowDecision:
    target_paths: tuple[int, ...]  # indices into the configured path list

    def __post_init__(self):
        if not self.target_paths:
            raise ValueError("flow decision must target at least one path")


class RoundRobinPolicy:
    """Cycle through paths in index order, one PDU per path per turn."""

    name = "round_robin"
    policy_class = "baseline"

    def __init__(self, n_paths: int):
        self._n = n_paths
        self._next = 0

    def decide(self, pdu_size: int, snapshots: list[PathSnapshot]) -> FlowDecision:
        idx = self._next
        self._next = (self._next + 1) % self._n
        return FlowDecision((idx,))


class QueueAwarePolicy:
    """Pick the path with the smallest estimated drain time for this PDU."""

    name = "queue_aware"
    policy_class = "extension"

    def __init__(self, n_paths: int):
        self._n = n_paths

    def decide(self, pdu_size: int, snapshots: list[PathSnapshot]) -> FlowDecision:
        best_idx = 0
        best_drain = None
        for idx, snap in enumerate(snapshots):
            rate = max(snap.rate_bps, DRAIN_RATE_FLOOR_BPS)
            drain = (snap.queue_bytes + pdu_size) * 8.0 / rate
            if best_drain is None or drain < best_drain:
                best_idx = idx
                best_drain = drain
        return FlowDecision((best_idx,))


class DuplicatePolicy:
    """Send one copy of every PDU on every configured path."""

    name = "duplicate"
    policy_class = "baseline"

    def __init__(self, n_paths: int):
        self._all = tuple(range(n_paths))

    def decide(self, pdu_size: int, snapshots: list[PathSnapshot]) -> FlowDecision:
        return FlowDecision(self._all)


POLICIES = {
    "round_robin": RoundRobinPolicy,
    "queue_aware": QueueAwarePolicy,
    "duplicate": DuplicatePolicy,
}


def make_policy(name: str, n_paths: int):
    try:
        cls = POLICIES[name]
    except KeyError:
        raise ValueError(f"unknown flow-control policy {name!r}") from None
    return cls(n_paths)


@dataclass
class TxState:
    next_count: int = 0
    submitted: int = 0


class PdcpTransmitter:
    """Assigns COUNTs to SDUs and routes PDU copies onto paths."""

    def __init__(self, paths: list, policy_name: str, sn_len: int = 12, collector=None):
        if sn_len not in SN_LENGTHS:
            raise ValueError(f"sn_len must be one of {SN_LENGTHS}")
        if not paths:
            raise ValueError("at least one path required")
        self.paths = paths
        self.policy = make_policy(policy_name, len(paths))
        self.sn_len = sn_len
        self.sn_modulus = 1 << sn_len
        self.state = TxState()
        self.collector = collector
        self._snapshot_cache: list[PathSnapshot] | None = None

    def live_snapshots(self) -> list[PathSnapshot]:
        return [
            PathSnapshot(p.path_id, p.flow_control_queue_bytes(), p.flow_control_rate_bps())
            for p in self.paths
        ]

    def refresh_snapshot_cache(self) -> None:
        """Fix the policy's view of the paths until the next refresh (stale feedback)."""
        self._snapshot_cache = self.live_snapshots()

    def snapshots(self) -> list[PathSnapshot]:
        if self._snapshot_cache is not None:
            return self._snapshot_cache
        return self.live_snapshots()

    def submit_sdu(self, size_bytes: int, t: SimTime, payload: object = None) -> list[PdcpPdu]:
        """Number one SDU and enqueue a copy on each path the policy selects."""
        count = self.state.next_count
        self.state.next_count += 1
        self.state.submitted += 1
        decision = self.policy.decide(size_bytes, self.snapshots())
        if self.collector is not None:
            self.collector.on_submit(count, size_bytes, len(decision.target_paths), t)
        pdus = []
        for idx in decision.target_paths:
            path = self.paths[idx]
            pdu = PdcpPdu(
                count=count,
                sn=count % self.sn_modulus,
                sdu_id=count,
                size_bytes=size_bytes,
                created_at=t,
                path_id=path.path_id,
                payload=payload,
            )
            pdus.append(pdu)
            path.enqueue(pdu, t)
        return pdus
