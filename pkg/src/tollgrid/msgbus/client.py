"""Broker client: connect, subscribe, publish.

A client owns one TCP connection and a reader thread. ``subscribe`` sends the
``_sub.<topic>`` control frame and blocks until the broker acks it, so a
publish issued afterwards (even from another connection) cannot race past the
subscription. Received messages land in per-topic local queues.

The handle is safe to share across threads; sends are serialized internally.
"""

from __future__ import annotations

import logging
import queue
import socket
import threading

from tollgrid.msgbus.frame import (
    CONTROL_PREFIX,
    SUBSCRIBE_ACK_TOPIC,
    FrameDecoder,
    ProtocolError,
    encode_frame,
    validate_topic,
)

logger = logging.getLogger(__name__)

_RECV_CHUNK = 65_536


class BusError(Exception):
    """Transport failure: connect, publish, or subscribe on a dead connection."""


class Subscription:
    """Client-side queue of payloads received for one topic."""

    def __init__(self, topic: str):
        self.topic = topic
        self._queue: queue.Queue = queue.Queue()
        self._acked = threading.Event()

    def get(self, timeout_s: float | None = None) -> bytes | None:
        """Next payload, or None when the timeout lapses."""
        try:
            return self._queue.get(timeout=timeout_s)
        except queue.Empty:
            return None

    def drain(self) -> list[bytes]:
        """All payloads currently buffered, without blocking."""
        items = []
        while True:
            try:
                items.append(self._queue.get_nowait())
            except queue.Empty:
                return items

    def __len__(self) -> int:
        return self._queue.qsize()


class BusClient:
    def __init__(self, host: str, port: int, name: str = "", connect_timeout_s: float = 5.0):
        self.name = name
        try:
            self._sock = socket.create_connection((host, port), timeout=connect_timeout_s)
        except OSError as exc:
            raise BusError("cannot connect to broker at %s:%d: %s" % (host, port, exc)) from exc
        self._sock.settimeout(None)
        self._sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._send_lock = threading.Lock()
        self._subs_lock = threading.Lock()
        self._subs: dict[str, Subscription] = {}
        self._closed = threading.Event()
        self._reader = threading.Thread(target=self._read_loop, name="bus-client-%s" % (name or "anon"), daemon=True)
        self._reader.start()

    @property
    def closed(self) -> bool:
        return self._closed.is_set()

    def _send(self, frame: bytes) -> None:
        if self._closed.is_set():
            raise BusError("connection closed")
        try:
            with self._send_lock:
                self._sock.sendall(frame)
        except OSError as exc:
            self._shutdown()
            raise BusError("send failed: %s" % exc) from exc

    def publish(self, topic: str, payload: bytes) -> None:
        if topic.startswith(CONTROL_PREFIX):
            raise ProtocolError("application publishes may not use the %r prefix" % CONTROL_PREFIX)
        self._send(encode_frame(topic, payload))

    def subscribe(self, topic: str, timeout_s: float = 5.0) -> Subscription:
        """Register for a topic; returns once the broker has acked.

        Subscribing twice to one topic returns the same subscription.
        """
        validate_topic(topic)
        with self._subs_lock:
            sub = self._subs.get(topic)
            if sub is None:
                sub = Subscription(topic)
                self._subs[topic] = sub
        if not sub._acked.is_set():
            self._send(encode_frame(CONTROL_PREFIX + topic, b""))
            if not sub._acked.wait(timeout_s):
                raise BusError("subscribe to %r not acked within %.1fs" % (topic, timeout_s))
        return sub

    def _read_loop(self):
        decoder = FrameDecoder()
        try:
            while True:
                data = self._sock.recv(_RECV_CHUNK)
                if not data:
                    break
                for topic, payload in decoder.feed(data):
                    self._dispatch(topic, payload)
        except (OSError, ProtocolError) as exc:
            if not self._closed.is_set():
                logger.warning("client %s: connection lost: %s", self.name or "-", exc)
        self._shutdown()

    def _dispatch(self, topic: str, payload: bytes) -> None:
        if topic == SUBSCRIBE_ACK_TOPIC:
            with self._subs_lock:
                sub = self._subs.get(payload.decode())
            if sub is not None:
                sub._acked.set()
            return
        with self._subs_lock:
            sub = self._subs.get(topic)
        if sub is not None:
            sub._queue.put(payload)
        else:
            logger.debug("client %s: message for unsubscribed topic %r dropped", self.name or "-", topic)

    def _shutdown(self):
        if self._closed.is_set():
            return
        self._closed.set()
        try:
            # shutdown() wakes a reader blocked in recv(); close() alone would not.
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            self._sock.close()
        except OSError:
            pass

    def close(self) -> None:
        self._shutdown()
        if threading.current_thread() is not self._reader:
            self._reader.join(timeout=5)
