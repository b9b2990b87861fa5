import pytest

from mcsim.pdcp_tx import (
    DuplicatePolicy,
    FlowDecision,
    PathSnapshot,
    PdcpTransmitter,
    QueueAwarePolicy,
    RoundRobinPolicy,
    make_policy,
)


class FakePath:
    """Accepts every PDU; records the order of arrivals."""

    def __init__(self, path_id, queue_bytes=0, rate_bps=10e6):
        self.path_id = path_id
        self.queue_bytes = queue_bytes
        self.rate_bps = rate_bps
        self.received = []

    def flow_control_queue_bytes(self):
        return self.queue_bytes

    def flow_control_rate_bps(self):
        return self.rate_bps

    def enqueue(self, pdu, t):
        self.received.append(pdu)
        return True


def make_tx(n_paths=2, policy="round_robin", sn_len=12, **path_kwargs):
    paths = [FakePath(chr(ord("A") + i), **path_kwargs) for i in range(n_paths)]
    return PdcpTransmitter(paths, policy, sn_len=sn_len), paths


def snaps(*pairs):
    return [PathSnapshot(f"P{i}", qb, rate) for i, (qb, rate) in enumerate(pairs)]


# -- sequencing ------------------------------------------------------------------


def test_first_sdu_gets_count_zero():
    tx, paths = make_tx()
    (pdu,) = tx.submit_sdu(1400, t=0)
    assert pdu.count == 0 and pdu.sn == 0 and pdu.sdu_id == 0


def test_sn_wraps_at_modulus():
    tx, _ = make_tx(sn_len=12)
    for _ in range(4096):
        tx.submit_sdu(100, t=0)
    (pdu,) = tx.submit_sdu(100, t=0)  # submission #4097, count 4096
    assert pdu.count == 4096
    assert pdu.sn == 0
    assert pdu.count >> 12 == 1  # hfn


def test_counts_gap_free_and_increasing():
    tx, _ = make_tx()
    counts = [tx.submit_sdu(100, t=0)[0].count for _ in range(50)]
    assert counts == list(range(50))


def test_duplication_stamps_same_count_on_each_path():
    tx, paths = make_tx(policy="duplicate")
    pdus = tx.submit_sdu(1400, t=5)
    assert len(pdus) == 2
    assert pdus[0].count == pdus[1].count == 0
    assert {p.path_id for p in pdus} == {"A", "B"}
    assert [len(p.received) for p in paths] == [1, 1]


def test_invalid_sn_len_rejected():
    with pytest.raises(ValueError):
        make_tx(sn_len=10)


def test_unknown_policy_rejected():
    with pytest.raises(ValueError):
        make_policy("weighted", 2)


# -- round robin -----------------------------------------------------------------


def test_round_robin_two_paths_alternate():
    policy = RoundRobinPolicy(2)
    order = [policy.decide(100, snaps((0, 1), (0, 1))).target_paths[0] for _ in range(4)]
    assert order == [0, 1, 0, 1]


def test_round_robin_three_paths_cycle():
    policy = RoundRobinPolicy(3)
    order = [policy.decide(100, snaps((0, 1), (0, 1), (0, 1))).target_paths[0] for _ in range(7)]
    assert order == [0, 1, 2, 0, 1, 2, 0]


def test_round_robin_single_path_degenerates_to_sc():
    policy = RoundRobinPolicy(1)
    assert all(
        policy.decide(100, snaps((0, 1))).target_paths == (0,) for _ in range(5)
    )


def test_round_robin_ignores_queue_state():
    policy = RoundRobinPolicy(2)
    first = policy.decide(100, snaps((10**9, 1), (0, 10e6))).target_paths[0]
    assert first == 0  # huge queue on path 0 does not matter


@pytest.mark.parametrize("m,k", [(10, 2), (11, 2), (17, 3), (100, 4)])
def test_round_robin_share_property(m, k):
    tx, paths = make_tx(n_paths=k)
    for _ in range(m):
        tx.submit_sdu(100, t=0)
    shares = [len(p.received) for p in paths]
    assert sum(shares) == m
    assert all(s in (m // k, -(-m // k)) for s in shares)


# -- queue aware -------------------------------------------------------------------


def test_queue_aware_prefers_emptier_queue_at_equal_rates():
    policy = QueueAwarePolicy(2)
    decision = policy.decide(1500, snaps((30000, 10e6), (10000, 10e6)))
    assert decision.target_paths == (1,)


def test_queue_aware_avoids_zero_rate_path():
    policy = QueueAwarePolicy(2)
    decision = policy.decide(1500, snaps((0, 0.0), (50000, 5e6)))
    assert decision.target_paths == (1,)


def test_queue_aware_drain_time_arithmetic():
    # drain = (queue + pdu) * 8 / rate: 16500*8/15e6 = 8.8 ms vs 16500*8/12e6 = 11 ms
    policy = QueueAwarePolicy(2)
    decision = policy.decide(1500, snaps((15000, 15e6), (15000, 12e6)))
    assert decision.target_paths == (0,)
    assert (15000 + 1500) * 8 / 15e6 == pytest.approx(0.0088)
    assert (15000 + 1500) * 8 / 12e6 == pytest.approx(0.011)


def test_queue_aware_tie_breaks_to_lowest_index():
    policy = QueueAwarePolicy(3)
    decision = policy.decide(1000, snaps((5000, 8e6), (5000, 8e6), (5000, 8e6)))
    assert decision.target_paths == (0,)


# -- duplicate ---------------------------------------------------------------------


@pytest.mark.parametrize("k", [1, 2, 3])
def test_duplicate_targets_all_paths(k):
    policy = DuplicatePolicy(k)
    assert policy.decide(100, snaps(*[(0, 1)] * k)).target_paths == tuple(range(k))


def test_flow_decision_must_be_nonempty():
    with pytest.raises(ValueError):
        FlowDecision(())


# -- policy / sequencing separation --------------------------------------------------


@pytest.mark.parametrize("policy", ["round_robin", "queue_aware", "duplicate"])
def test_policy_never_alters_count_assignment(policy):
    tx, _ = make_tx(policy=policy)
    counts = [tx.submit_sdu(100, t=0)[0].count for _ in range(20)]
    assert counts == list(range(20))
