"""End-to-end latency bookkeeping from embedded send timestamps.

Latencies are stored as integer microseconds, which is the resolution of
the simulated broker clock; means and percentiles are computed from those
integers so a constant injected latency is recovered exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


class LatencyError(ValueError):
    pass


@dataclass(frozen=True)
class LatencySample:
    send_ms: float
    recv_ms: float
    topic: str = ""

    @property
    def latency_ms(self) -> float:
        return self.recv_ms - self.send_ms


@dataclass(frozen=True)
class LatencyStats:
    count: int
    mean_ms: float
    min_ms: float
    max_ms: float
    p50_ms: float
    p95_ms: float


def nearest_rank(sorted_values: list, pct: float):
    rank = max(1, math.ceil(pct / 100.0 * len(sorted_values)))
    return sorted_values[rank - 1]


class LatencySink:
    """Bounded collector for one subscriber.

    Samples whose receive time precedes the send time are counted in
    ``clock_anomalies`` and not stored. Once ``capacity`` samples are held,
    further samples are rejected and counted in ``overflow``.
    """

    def __init__(self, capacity: int = 1_000_000) -> None:
        if capacity < 1:
            raise LatencyError("capacity must be >= 1")
        self.capacity = capacity
        self._us: list[int] = []
        self.clock_anomalies = 0
        self.overflow = 0

    def __len__(self) -> int:
        return len(self._us)

    def record(self, sample: LatencySample) -> None:
        if sample.recv_ms < sample.send_ms:
            self.clock_anomalies += 1
            return
        if len(self._us) >= self.capacity:
            self.overflow += 1
            return
        self._us.append(round((sample.recv_ms - sample.send_ms) * 1000.0))

    def latencies_ms(self) -> list[float]:
        return [us / 1000.0 for us in self._us]

    def stats(self) -> LatencyStats:
        if not self._us:
            raise LatencyError("no latency samples recorded")
        s = sorted(self._us)
        return LatencyStats(
            count=len(s),
            mean_ms=sum(s) / len(s) / 1000.0,
            min_ms=s[0] / 1000.0,
            max_ms=s[-1] / 1000.0,
            p50_ms=nearest_rank(s, 50) / 1000.0,
            p95_ms=nearest_rank(s, 95) / 1000.0,
        )

    def export_histogram(self, bin_width_ms: float) -> list[tuple[float, int]]:
        """Fixed-width bins starting at the minimum sample, ``[start, start + width)``."""
        if not bin_width_ms > 0:
            raise LatencyError("bin_width_ms must be > 0")
        if not self._us:
            raise LatencyError("no latency samples recorded")
        width_us = bin_width_ms * 1000.0
        lo, hi = min(self._us), max(self._us)
        counts = [0] * (int((hi - lo) // width_us) + 1)
        for us in self._us:
            counts[int((us - lo) // width_us)] += 1
        return [((lo + i * width_us) / 1000.0, c) for i, c in enumerate(counts)]


def record(sink: LatencySink, sample: LatencySample) -> None:
    sink.record(sample)


def stats(sink: LatencySink) -> LatencyStats:
    return sink.stats()


def export_histogram(sink: LatencySink, bin_width_ms: float) -> list[tuple[float, int]]:
    return sink.export_histogram(bin_width_ms)
