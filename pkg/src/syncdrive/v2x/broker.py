"""In-process pub/sub broker driven by the simulation clock.

Each published message draws, in publish order, one uniform (drop test)
and one standard normal (latency) from the broker's seeded generator, so a
given publish schedule always produces the same delivery schedule.
Delivery is at-most-once: no retries, no retained messages.

Latency is a mean-centred shifted lognormal::

    latency_ms = base_latency_ms + jitter_ms * (exp(shape * z) - exp(shape**2 / 2))

whose expectation is ``base_latency_ms``. Times are kept internally as
integer microseconds.
"""

from __future__ import annotations

import heapq
import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np


class BrokerError(RuntimeError):
    pass


@dataclass(frozen=True)
class NetworkModel:
    base_latency_ms: float = 49.73
    jitter_ms: float = 10.0
    loss_prob: float = 0.01
    seed: int = 0
    reorder_allowed: bool = False
    jitter_shape: float = 0.5

    def __post_init__(self) -> None:
        if not (math.isfinite(self.base_latency_ms) and self.base_latency_ms >= 0):
            raise ValueError("base_latency_ms must be >= 0")
        if not (math.isfinite(self.jitter_ms) and self.jitter_ms >= 0):
            raise ValueError("jitter_ms must be >= 0")
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ValueError("loss_prob must lie in [0, 1]")
        if not (math.isfinite(self.jitter_shape) and self.jitter_shape > 0):
            raise ValueError("jitter_shape must be > 0")

    def latency_us(self, z: float) -> int:
        """Map a standard normal draw to a non-negative latency in µs."""
        jitter = 0.0
        if self.jitter_ms > 0:
            s = self.jitter_shape
            jitter = self.jitter_ms * (math.exp(s * z) - math.exp(0.5 * s * s))
        return max(0, round((self.base_latency_ms + jitter) * 1000.0))


def validate_pattern(pattern: str) -> list[str]:
    if not isinstance(pattern, str) or not pattern:
        raise BrokerError("topic pattern must be a non-empty string")
    levels = pattern.split("/")
    for i, level in enumerate(levels):
        if level in ("+", "#"):
            if level == "#" and i != len(levels) - 1:
                raise BrokerError(f"'#' must be the last level in {pattern!r}")
        elif "+" in level or "#" in level:
            raise BrokerError(f"wildcard must occupy a whole level in {pattern!r}")
    return levels


def topic_matches(levels: list[str], topic: str) -> bool:
    parts = topic.split("/")
    for i, level in enumerate(levels):
        if level == "#":
            return True
        if i >= len(parts):
            return False
        if level != "+" and level != parts[i]:
            return False
    return len(parts) == len(levels)


@dataclass(eq=False)
class Subscription:
    sub_id: int
    pattern: str
    levels: list[str] = field(repr=False)

    def matches(self, topic: str) -> bool:
        return topic_matches(self.levels, topic)


@dataclass(frozen=True)
class Delivery:
    subscription: Subscription
    topic: str
    payload: bytes
    send_us: int
    delivery_us: int

    @property
    def send_time(self) -> float:
        return self.send_us / 1e6

    @property
    def delivery_time(self) -> float:
        return self.delivery_us / 1e6

    @property
    def delivery_time_ms(self) -> float:
        return self.delivery_us / 1000.0


@dataclass
class TopicCounters:
    published: int = 0
    dropped: int = 0
    delivered: int = 0

    @property
    def in_flight(self) -> int:
        return self.published - self.dropped - self.delivered


def to_us(t_s: float) -> int:
    return round(t_s * 1e6)


class SimBroker:
    def __init__(self, network: NetworkModel, rng: np.random.Generator | None = None) -> None:
        self.network = network
        self.rng = rng if rng is not None else np.random.default_rng(network.seed)
        self._subs: list[Subscription] = []
        self._ids = itertools.count()
        self._seq = itertools.count()
        self._pending: list[tuple[int, int, str, bytes, int, tuple[Subscription, ...]]] = []
        self._last_delivery: dict[str, int] = {}
        self.counters: dict[str, TopicCounters] = defaultdict(TopicCounters)
        self.closed = False

    def subscribe(self, pattern: str) -> Subscription:
        sub = Subscription(next(self._ids), pattern, validate_pattern(pattern))
        self._subs.append(sub)
        return sub

    def unsubscribe(self, sub: Subscription) -> None:
        self._subs = [s for s in self._subs if s is not sub]

    def publish(self, topic: str, payload: bytes, send_time: float) -> bool:
        """Enqueue ``payload``; returns False when the network dropped it."""
        if self.closed:
            raise BrokerError("broker is closed")
        if not topic or "+" in topic or "#" in topic:
            raise BrokerError(f"invalid publish topic {topic!r}")
        u = float(self.rng.random())
        z = float(self.rng.standard_normal())
        counters = self.counters[topic]
        counters.published += 1
        if u < self.network.loss_prob:
            counters.dropped += 1
            return False

        send_us = to_us(send_time)
        delivery_us = send_us + self.network.latency_us(z)
        if not self.network.reorder_allowed:
            delivery_us = max(delivery_us, self._last_delivery.get(topic, delivery_us))
            self._last_delivery[topic] = delivery_us
        # receivers are fixed at publish time: later subscribers do not see it
        receivers = tuple(s for s in self._subs if s.matches(topic))
        heapq.heappush(
            self._pending, (delivery_us, next(self._seq), topic, bytes(payload), send_us, receivers)
        )
        return True

    def poll_deliveries(self, now: float) -> list[Delivery]:
        """Pop every message due at or before ``now``, one entry per receiver."""
        return self._release(to_us(now))

    def drain(self) -> list[Delivery]:
        """Release everything still in flight regardless of the clock."""
        return self._release(None)

    def _release(self, now_us: int | None) -> list[Delivery]:
        out = []
        active = set(self._subs)
        while self._pending and (now_us is None or self._pending[0][0] <= now_us):
            delivery_us, _, topic, payload, send_us, receivers = heapq.heappop(self._pending)
            self.counters[topic].delivered += 1
            for sub in receivers:
                if sub in active:
                    out.append(Delivery(sub, topic, payload, send_us, delivery_us))
        return out

    @property
    def in_flight(self) -> int:
        return len(self._pending)

    def totals(self) -> TopicCounters:
        total = TopicCounters()
        for c in self.counters.values():
            total.published += c.published
            total.dropped += c.dropped
            total.delivered += c.delivered
        return total

    def close(self) -> None:
        self.closed = True
