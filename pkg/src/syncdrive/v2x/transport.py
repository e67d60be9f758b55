"""Wall-clock transports sharing the broker's publish/subscribe contract.

``MqttTransport`` talks MQTT 3.1.1 at QoS 0 with a clean session. The
network loop runs on paho's background thread and hands messages over
through a FIFO queue that the consumer drains with :meth:`poll`.
"""

from __future__ import annotations

import logging
import queue
import time
from dataclasses import dataclass
from typing import Protocol
from urllib.parse import urlparse

from .broker import topic_matches, validate_pattern

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Received:
    topic: str
    payload: bytes
    recv_time_ms: float


class Transport(Protocol):
    def publish(self, topic: str, payload: bytes) -> None: ...

    def subscribe(self, pattern: str) -> None: ...

    def poll(self) -> list[Received]: ...

    def close(self) -> None: ...


def wall_ms() -> float:
    return time.time_ns() / 1e6


class LoopbackTransport:
    """Same-process transport; delivery is immediate on publish."""

    def __init__(self, clock=wall_ms) -> None:
        self._clock = clock
        self._patterns: list[list[str]] = []
        self._queue: queue.SimpleQueue[Received] = queue.SimpleQueue()

    def publish(self, topic: str, payload: bytes) -> None:
        if any(topic_matches(levels, topic) for levels in self._patterns):
            self._queue.put(Received(topic, bytes(payload), self._clock()))

    def subscribe(self, pattern: str) -> None:
        self._patterns.append(validate_pattern(pattern))

    def poll(self) -> list[Received]:
        out = []
        while True:
            try:
                out.append(self._queue.get_nowait())
            except queue.Empty:
                return out

    def close(self) -> None:
        self._patterns.clear()


class TransportError(ConnectionError):
    pass


def parse_broker_uri(uri: str) -> tuple[str, int]:
    parsed = urlparse(uri if "://" in uri else f"mqtt://{uri}")
    if parsed.scheme not in ("mqtt", "tcp"):
        raise TransportError(f"unsupported broker scheme {parsed.scheme!r} (use mqtt://host:port)")
    if not parsed.hostname:
        raise TransportError(f"broker URI {uri!r} has no host")
    return parsed.hostname, parsed.port or 1883


class MqttTransport:
    def __init__(self, uri: str, client_id: str = "", connect_timeout_s: float = 5.0) -> None:
        import paho.mqtt.client as mqtt

        host, port = parse_broker_uri(uri)
        self._queue: queue.SimpleQueue[Received] = queue.SimpleQueue()
        self._client = mqtt.Client(
            mqtt.CallbackAPIVersion.VERSION2,
            client_id=client_id,
            protocol=mqtt.MQTTv311,
            clean_session=True,
        )
        self._client.on_message = self._on_message
        try:
            self._client.connect(host, port, keepalive=30)
        except OSError as exc:
            raise TransportError(f"cannot connect to MQTT broker {host}:{port}: {exc}") from exc
        self._client.loop_start()
        deadline = time.monotonic() + connect_timeout_s
        while not self._client.is_connected():
            if time.monotonic() > deadline:
                self.close()
                raise TransportError(f"MQTT broker {host}:{port} did not acknowledge the connection")
            time.sleep(0.01)
        log.info("connected to %s:%d", host, port)

    def _on_message(self, client, userdata, message) -> None:
        self._queue.put(Received(message.topic, bytes(message.payload), wall_ms()))

    def publish(self, topic: str, payload: bytes) -> None:
        self._client.publish(topic, payload, qos=0, retain=False)

    def subscribe(self, pattern: str) -> None:
        validate_pattern(pattern)
        self._client.subscribe(pattern, qos=0)

    def poll(self) -> list[Received]:
        out = []
        while True:
            try:
                out.append(self._queue.get_nowait())
            except queue.Empty:
                return out

    def close(self) -> None:
        self._client.loop_stop()
        self._client.disconnect()
