import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from syncdrive.v2x import BrokerError, NetworkModel, SimBroker, topic_matches, validate_pattern

IDEAL = NetworkModel(base_latency_ms=0.0, jitter_ms=0.0, loss_prob=0.0)


def test_total_loss():
    b = SimBroker(NetworkModel(loss_prob=1.0))
    b.subscribe("vehicles/+/cam")
    for i in range(100):
        assert b.publish("vehicles/1/cam", b"x", i * 0.1) is False
    assert b.poll_deliveries(1e9) == []
    c = b.counters["vehicles/1/cam"]
    assert (c.published, c.dropped, c.delivered) == (100, 100, 0)


def test_ideal_network_is_immediate_and_fifo():
    b = SimBroker(IDEAL)
    sub = b.subscribe("vehicles/1/cam")
    for i in range(5):
        b.publish("vehicles/1/cam", bytes([i]), 1.0)
    got = b.poll_deliveries(1.0)
    assert [d.payload for d in got] == [bytes([i]) for i in range(5)]
    assert all(d.delivery_time == d.send_time == 1.0 for d in got)
    assert all(d.subscription is sub for d in got)


def test_fixed_latency_delivery_instant():
    b = SimBroker(NetworkModel(base_latency_ms=50.0, jitter_ms=0.0, loss_prob=0.0))
    b.subscribe("vehicles/1/cam")
    b.publish("vehicles/1/cam", b"m", 1.0)
    assert b.poll_deliveries(1.049) == []
    got = b.poll_deliveries(1.050)
    assert len(got) == 1 and got[0].delivery_us == 1_050_000


def test_latency_law_without_jitter():
    b = SimBroker(NetworkModel(base_latency_ms=49.73, jitter_ms=0.0, loss_prob=0.0))
    b.subscribe("t")
    for i in range(200):
        b.publish("t", b"", i * 0.013)
    got = b.poll_deliveries(100.0)
    assert {d.delivery_us - d.send_us for d in got} == {49730}


def test_subscriber_only_sees_later_messages():
    b = SimBroker(IDEAL)
    b.publish("vehicles/1/cam", b"early", 0.0)
    sub = b.subscribe("vehicles/1/cam")
    b.publish("vehicles/1/cam", b"late", 0.0)
    assert [d.payload for d in b.poll_deliveries(0.0)] == [b"late"]
    assert sub.pattern == "vehicles/1/cam"


def test_fan_out_to_matching_subscribers():
    b = SimBroker(IDEAL)
    exact = b.subscribe("vehicles/1/cam")
    wild = b.subscribe("vehicles/+/cam")
    other = b.subscribe("vehicles/2/cam")
    b.publish("vehicles/1/cam", b"a", 0.0)
    got = b.poll_deliveries(0.0)
    assert {d.subscription.sub_id for d in got} == {exact.sub_id, wild.sub_id}
    assert other not in {d.subscription for d in got}
    assert b.counters["vehicles/1/cam"].delivered == 1


def test_unsubscribe_stops_delivery():
    b = SimBroker(IDEAL)
    sub = b.subscribe("t")
    b.publish("t", b"a", 0.0)
    b.unsubscribe(sub)
    assert b.poll_deliveries(0.0) == []
    assert b.counters["t"].delivered == 1


def test_closed_broker_refuses_publish():
    b = SimBroker(IDEAL)
    b.close()
    with pytest.raises(BrokerError):
        b.publish("t", b"", 0.0)


@pytest.mark.parametrize("pattern", ["", "a/b+/c", "a/#/c", "a/b#"])
def test_invalid_patterns(pattern):
    with pytest.raises(BrokerError):
        SimBroker(IDEAL).subscribe(pattern)


def test_wildcard_matching():
    plus = validate_pattern("vehicles/+/cam")
    assert topic_matches(plus, "vehicles/17/cam")
    assert not topic_matches(plus, "vehicles/17/denm")
    assert not topic_matches(plus, "vehicles/17/cam/x")
    assert not topic_matches(plus, "vehicles/cam")
    hash_ = validate_pattern("vehicles/#")
    assert topic_matches(hash_, "vehicles/1/cam")


def _schedule(model, times):
    b = SimBroker(model)
    b.subscribe("vehicles/+/cam")
    for i, t in enumerate(times):
        b.publish(f"vehicles/{i % 3}/cam", str(i).encode(), t)
    return [(d.topic, d.payload, d.send_us, d.delivery_us) for d in b.drain()], b


def test_determinism_same_seed():
    times = np.arange(500) * 0.05
    model = NetworkModel(jitter_ms=30.0, loss_prob=0.2, seed=5, reorder_allowed=True)
    assert _schedule(model, times)[0] == _schedule(model, times)[0]
    other = NetworkModel(jitter_ms=30.0, loss_prob=0.2, seed=6, reorder_allowed=True)
    assert _schedule(model, times)[0] != _schedule(other, times)[0]


@given(st.integers(0, 2**31), st.floats(0, 1), st.integers(1, 300))
def test_conservation(seed, p, n):
    model = NetworkModel(jitter_ms=20.0, loss_prob=p, seed=seed)
    _, b = _schedule(model, np.arange(n) * 0.01)
    for c in b.counters.values():
        assert c.delivered + c.dropped == c.published
        assert c.in_flight == 0


def test_fifo_enforced_without_reordering():
    # heavy jitter relative to the publish interval would reorder freely
    model = NetworkModel(base_latency_ms=50, jitter_ms=40.0, loss_prob=0.0, seed=3, reorder_allowed=False)
    sched, _ = _schedule(model, np.arange(300) * 0.002)
    per_topic = {}
    for topic, payload, _, delivery in sched:
        per_topic.setdefault(topic, []).append(int(payload))
    for seq in per_topic.values():
        assert seq == sorted(seq)
    reordered, _ = _schedule(
        NetworkModel(base_latency_ms=50, jitter_ms=40.0, loss_prob=0.0, seed=3, reorder_allowed=True),
        np.arange(300) * 0.002,
    )
    assert [int(p) for _, p, _, _ in reordered] != sorted(int(p) for _, p, _, _ in reordered)


def test_delivery_order_ties_by_publish_order():
    b = SimBroker(IDEAL)
    b.subscribe("#")
    for i in range(10):
        b.publish(f"t/{i}", bytes([i]), 0.5)
    assert [d.payload[0] for d in b.poll_deliveries(0.5)] == list(range(10))


def test_lognormal_mean_is_base():
    model = NetworkModel(base_latency_ms=49.73, jitter_ms=15.0, loss_prob=0.0, seed=11)
    rng = np.random.default_rng(0)
    lat = np.array([model.latency_us(z) for z in rng.standard_normal(200_000)]) / 1000.0
    assert lat.mean() == pytest.approx(49.73, rel=0.01)
    assert np.mean((lat - lat.mean()) ** 3) > 0  # right-skewed
    assert lat.min() >= 0


@pytest.mark.parametrize(
    "kwargs", [{"base_latency_ms": -1}, {"loss_prob": 1.5}, {"jitter_ms": -2}, {"jitter_shape": 0}]
)
def test_network_model_invariants(kwargs):
    with pytest.raises(ValueError):
        NetworkModel(**kwargs)
