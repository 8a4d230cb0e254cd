"""Embedded TCP pub/sub broker.

One reader thread and one writer thread per connection. The reader decodes
frames: control frames (topic ``_sub.<name>``) register a subscription and
are answered with a ``_sub.ok`` ack; anything else is a publish, fanned out
to every current subscription with an exactly matching topic.

Delivery is at-most-once. Each subscription buffers up to ``sub_capacity``
messages; when a consumer stalls, the oldest buffered message is dropped and
counted. Because a publisher's reader thread enqueues synchronously in
receive order, per-publisher FIFO holds for every subscription.
"""

from __future__ import annotations

import logging
import socket
import threading
from collections import deque
from dataclasses import dataclass, field

from tollgrid.msgbus.frame import (
    CONTROL_PREFIX,
    SUBSCRIBE_ACK_TOPIC,
    FrameDecoder,
    ProtocolError,
    encode_frame,
    validate_topic,
)

logger = logging.getLogger(__name__)

DEFAULT_HOST = "127.0.0.1"
DEFAULT_PORT = 4333
DEFAULT_SUB_CAPACITY = 10_000

_RECV_CHUNK = 65_536


@dataclass
class BrokerStats:
    published: dict = field(default_factory=dict)  # topic -> count
    delivered: dict = field(default_factory=dict)  # topic -> count
    dropped: dict = field(default_factory=dict)  # "conn<id>:<topic>" -> count
    connections: int = 0

    def to_dict(self) -> dict:
        return {
            "published": dict(self.published),
            "delivered": dict(self.delivered),
            "dropped": dict(self.dropped),
            "connections": self.connections,
        }


class _Subscription:
    """Server-side buffered queue for one (connection, topic) pair."""

    __slots__ = ("topic", "conn", "capacity", "queue", "dropped")

    def __init__(self, topic, conn, capacity):
        self.topic = topic
        self.conn = conn
        self.capacity = capacity
        self.queue = deque()  # (seq, frame bytes)
        self.dropped = 0

    @property
    def key(self) -> str:
        return "conn%d:%s" % (self.conn.conn_id, self.topic)


class _Connection:
    """Per-socket state: reader thread, writer thread, outgoing queues."""

    def __init__(self, broker, sock, conn_id):
        self.broker = broker
        self.sock = sock
        self.conn_id = conn_id
        self.lock = threading.Lock()
        self.cond = threading.Condition(self.lock)
        self.subs: dict[str, _Subscription] = {}
        # Control replies (subscribe acks) ride the same merged outbox.
        self.control = _Subscription("_ctl", self, DEFAULT_SUB_CAPACITY)
        self.next_seq = 0
        self.closing = False
        self.reader = threading.Thread(target=self._read_loop, name="bus-read-%d" % conn_id, daemon=True)
        self.writer = threading.Thread(target=self._write_loop, name="bus-write-%d" % conn_id, daemon=True)

    def start(self):
        self.reader.start()
        self.writer.start()

    # -- enqueue (called from any connection's reader thread) --------------

    def enqueue(self, sub: _Subscription, frame: bytes) -> None:
        with self.lock:
            if self.closing:
                return
            sub.queue.append((self.next_seq, frame))
            self.next_seq += 1
            if len(sub.queue) > sub.capacity:
                sub.queue.popleft()
                sub.dropped += 1
                self.broker._count_drop(sub)
            self.cond.notify()

    # -- writer -------------------------------------------------------------

    def _next_outgoing(self):
        """Pop the globally oldest queued frame across this connection's
        subscriptions (and control replies), or None when told to finish."""
        with self.lock:
            while True:
                best = None
                for sub in [self.control, *self.subs.values()]:
                    if sub.queue and (best is None or sub.queue[0][0] < best.queue[0][0]):
                        best = sub
                if best is not None:
                    seq, frame = best.queue.popleft()
                    return best.topic, frame
                if self.closing:
                    return None
                self.cond.wait()

    def _write_loop(self):
        while True:
            item = self._next_outgoing()
            if item is None:
                break
            topic, frame = item
            try:
                self.sock.sendall(frame)
            except OSError:
                break
            if topic != "_ctl":
                self.broker._count_delivery(topic)
        self.broker._drop_connection(self)

    # -- reader -------------------------------------------------------------

    def _read_loop(self):
        decoder = FrameDecoder()
        try:
            while True:
                data = self.sock.recv(_RECV_CHUNK)
                if not data:
                    break
                for topic, payload in decoder.feed(data):
                    self._handle_frame(topic, payload)
        except ProtocolError as exc:
            logger.warning("conn %d: protocol violation, closing: %s", self.conn_id, exc)
        except OSError:
            pass
        self.finish()

    def _handle_frame(self, topic: str, payload: bytes) -> None:
        if topic.startswith(CONTROL_PREFIX):
            subtopic = topic[len(CONTROL_PREFIX):]
            validate_topic(subtopic)
            self.broker._register_subscription(self, subtopic)
            self.enqueue(self.control, encode_frame(SUBSCRIBE_ACK_TOPIC, subtopic.encode()))
        else:
            self.broker._publish(topic, payload)

    # -- teardown -----------------------------------------------------------

    def finish(self):
        """Stop accepting new work and let the writer drain, then close."""
        with self.lock:
            self.closing = True
            self.cond.notify()


class Broker:
    """Topic pub/sub broker over TCP. ``start`` binds and returns the port."""

    def __init__(self, host: str = DEFAULT_HOST, port: int = DEFAULT_PORT, sub_capacity: int = DEFAULT_SUB_CAPACITY):
        self._host = host
        self._port = port
        self._sub_capacity = sub_capacity
        self._lock = threading.Lock()
        self._listener: socket.socket | None = None
        self._accept_thread: threading.Thread | None = None
        self._connections: dict[int, _Connection] = {}
        self._subs_by_topic: dict[str, list[_Subscription]] = {}
        self._stats = BrokerStats()
        self._next_conn_id = 0
        self._stopping = False
        self._stopped = False

    # -- lifecycle ----------------------------------------------------------

    def start(self) -> int:
        if self._listener is not None:
            raise RuntimeError("broker already started")
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            listener.bind((self._host, self._port))
        except OSError:
            listener.close()
            raise
        listener.listen(128)
        self._listener = listener
        self._accept_thread = threading.Thread(target=self._accept_loop, name="bus-accept", daemon=True)
        self._accept_thread.start()
        logger.info("broker listening on %s:%d", self._host, self.port)
        return self.port

    @property
    def port(self) -> int:
        if self._listener is None:
            raise RuntimeError("broker not started")
        return self._listener.getsockname()[1]

    def _accept_loop(self):
        while True:
            try:
                sock, addr = self._listener.accept()
            except OSError:
                return  # listener closed
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            with self._lock:
                if self._stopping:
                    sock.close()
                    return
                conn_id = self._next_conn_id
                self._next_conn_id += 1
                conn = _Connection(self, sock, conn_id)
                self._connections[conn_id] = conn
                self._stats.connections += 1
            logger.debug("conn %d accepted from %s", conn_id, addr)
            conn.start()

    def stop(self) -> None:
        with self._lock:
            if self._stopped:
                return
            self._stopped = True
            self._stopping = True
            conns = list(self._connections.values())
        if self._listener is not None:
            # A blocked accept() is not interrupted by closing the listener;
            # poke it awake with a throwaway connection, then close.
            host = "127.0.0.1" if self._host in ("", "0.0.0.0") else self._host
            try:
                socket.create_connection((host, self.port), timeout=1).close()
            except OSError:
                pass
            self._listener.close()
        for conn in conns:
            conn.finish()
        for conn in conns:
            conn.writer.join(timeout=5)
        if self._accept_thread is not None:
            self._accept_thread.join(timeout=5)
        logger.info("broker stopped")

    # -- pub/sub internals ----------------------------------------------------

    def _register_subscription(self, conn: _Connection, topic: str) -> None:
        with self._lock:
            if topic in conn.subs:
                return  # idempotent
            sub = _Subscription(topic, conn, self._sub_capacity)
            conn.subs[topic] = sub
            self._subs_by_topic.setdefault(topic, []).append(sub)

    def _publish(self, topic: str, payload: bytes) -> None:
        frame = encode_frame(topic, payload)
        with self._lock:
            self._stats.published[topic] = self._stats.published.get(topic, 0) + 1
            targets = list(self._subs_by_topic.get(topic, ()))
        for sub in targets:
            sub.conn.enqueue(sub, frame)

    def _count_delivery(self, topic: str) -> None:
        with self._lock:
            self._stats.delivered[topic] = self._stats.delivered.get(topic, 0) + 1

    def _count_drop(self, sub: _Subscription) -> None:
        # Caller holds the connection lock, never the broker lock; fine to take it.
        with self._lock:
            self._stats.dropped[sub.key] = self._stats.dropped.get(sub.key, 0) + 1

    def _drop_connection(self, conn: _Connection) -> None:
        with self._lock:
            if conn.conn_id not in self._connections:
                return
            del self._connections[conn.conn_id]
            self._stats.connections -= 1
            for sub in conn.subs.values():
                bucket = self._subs_by_topic.get(sub.topic)
                if bucket and sub in bucket:
                    bucket.remove(sub)
                    if not bucket:
                        del self._subs_by_topic[sub.topic]
        try:
            # shutdown() forces the FIN out and wakes the connection's reader
            # if it is still blocked in recv(); close() alone leaves it stuck.
            conn.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            conn.sock.close()
        except OSError:
            pass
        logger.debug("conn %d closed", conn.conn_id)

    def stats(self) -> BrokerStats:
        with self._lock:
            return BrokerStats(
                dict(self._stats.published),
                dict(self._stats.delivered),
                dict(self._stats.dropped),
                self._stats.connections,
            )
