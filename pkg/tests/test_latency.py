import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from syncdrive.latency import LatencyError, LatencySample, LatencySink, export_histogram, record, stats
from syncdrive.v2x import NetworkModel, SimBroker


def sink_of(latencies):
    s = LatencySink()
    for i, lat in enumerate(latencies):
        record(s, LatencySample(1000.0 * i, 1000.0 * i + lat, "t"))
    return s


def test_constant():
    st_ = stats(sink_of([50, 50, 50]))
    assert (st_.mean_ms, st_.min_ms, st_.max_ms) == (50, 50, 50)


def test_symmetric():
    st_ = stats(sink_of([40, 50, 60]))
    assert st_.mean_ms == 50 and st_.p50_ms == 50
    assert st_.p95_ms == 60


def test_nearest_rank_percentiles():
    st_ = stats(sink_of(range(1, 101)))
    assert (st_.p50_ms, st_.p95_ms) == (50, 95)


def test_empty_sink():
    with pytest.raises(LatencyError):
        stats(LatencySink())
    with pytest.raises(LatencyError):
        export_histogram(LatencySink(), 1.0)


def test_clock_anomalies_counted_not_stored():
    s = LatencySink()
    s.record(LatencySample(10.0, 9.0))
    assert len(s) == 0 and s.clock_anomalies == 1


def test_capacity_overflow_rejects_new():
    s = LatencySink(capacity=3)
    for lat in (1, 2, 3, 4, 5):
        s.record(LatencySample(0.0, lat))
    assert len(s) == 3 and s.overflow == 2
    assert s.stats().max_ms == 3


def test_constant_injected_latency_recovered_exactly():
    broker = SimBroker(NetworkModel(base_latency_ms=49.73, jitter_ms=0.0, loss_prob=0.0))
    broker.subscribe("vehicles/1/cam")
    for i in range(1000):
        broker.publish("vehicles/1/cam", b"", i * 0.1)
    sink = LatencySink()
    for d in broker.poll_deliveries(200.0):
        sink.record(LatencySample(d.send_us / 1000.0, d.delivery_time_ms))
    assert sink.stats().count == 1000
    assert sink.stats().mean_ms == 49.73


@given(st.lists(st.floats(0, 500), min_size=1, max_size=200), st.floats(0.1, 50))
def test_histogram_conserves_count(lats, width):
    s = sink_of(lats)
    hist = s.export_histogram(width)
    assert sum(c for _, c in hist) == len(lats)
    assert hist[0][0] == s.stats().min_ms
    assert hist[-1][0] <= s.stats().max_ms


@given(st.lists(st.floats(0, 500), min_size=1, max_size=100), st.randoms())
def test_order_independent(lats, rnd):
    shuffled = list(lats)
    rnd.shuffle(shuffled)
    assert sink_of(lats).stats() == sink_of(shuffled).stats()


@given(st.lists(st.floats(0, 500), min_size=1, max_size=100))
def test_stats_ordering(lats):
    s = sink_of(lats).stats()
    assert s.min_ms <= s.p50_ms <= s.p95_ms <= s.max_ms
    assert s.min_ms <= s.mean_ms <= s.max_ms
