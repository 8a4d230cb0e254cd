"""Wire format: length-prefixed frames carrying a topic and an opaque payload.

Layout on the wire, all integers big-endian:

    4 bytes  total_len   (= 2 + len(topic bytes) + len(payload))
    2 bytes  topic_len
    N bytes  topic       (UTF-8, charset [a-z0-9._-])
    M bytes  payload

Topics are sent exactly as given — the broker never prepends or rewrites
anything. Frames from topics starting with ``_sub.`` are broker control
messages, not application traffic.
"""

from __future__ import annotations

import re

MAX_PAYLOAD_BYTES = 16 * 1024 * 1024  # 16 MiB
MAX_TOPIC_BYTES = 65_535
# Largest total_len any conforming encoder can produce; beyond this the
# declared length is hostile and the connection should be dropped.
MAX_TOTAL_LEN = 2 + MAX_TOPIC_BYTES + MAX_PAYLOAD_BYTES

HEADER_LEN = 4

CONTROL_PREFIX = "_sub."
SUBSCRIBE_ACK_TOPIC = "_sub.ok"

_TOPIC_RE = re.compile(r"[a-z0-9._-]+\Z")


class ProtocolError(Exception):
    """Malformed frame or invalid topic."""


class FrameSizeError(ProtocolError):
    """Payload or declared frame length over the 16 MiB cap."""


def validate_topic(topic: str) -> None:
    if not isinstance(topic, str) or not _TOPIC_RE.fullmatch(topic):
        raise ProtocolError("invalid topic %r (allowed: [a-z0-9._-], non-empty)" % (topic,))
    if len(topic.encode()) > MAX_TOPIC_BYTES:
        raise ProtocolError("topic longer than %d bytes" % MAX_TOPIC_BYTES)


def encode_frame(topic: str, payload: bytes) -> bytes:
    validate_topic(topic)
    if not isinstance(payload, (bytes, bytearray, memoryview)):
        raise ProtocolError("payload must be bytes, got %s" % type(payload).__name__)
    payload = bytes(payload)
    if len(payload) > MAX_PAYLOAD_BYTES:
        raise FrameSizeError("payload of %d bytes exceeds 16 MiB cap" % len(payload))
    topic_bytes = topic.encode()
    total_len = 2 + len(topic_bytes) + len(payload)
    return total_len.to_bytes(4, "big") + len(topic_bytes).to_bytes(2, "big") + topic_bytes + payload


def decode_frame(buffer: bytes) -> tuple[tuple[str, bytes], int] | None:
    """Decode one frame from the head of ``buffer``.

    Returns ((topic, payload), bytes_consumed), or None when the buffer does
    not yet hold a complete frame. Raises ProtocolError on malformed input.
    """
    if len(buffer) < HEADER_LEN:
        return None
    total_len = int.from_bytes(buffer[:4], "big")
    if total_len > MAX_TOTAL_LEN:
        raise FrameSizeError("declared frame length %d exceeds cap" % total_len)
    if total_len < 3:  # must hold topic_len plus at least one topic byte
        raise ProtocolError("declared frame length %d too short" % total_len)
    if len(buffer) < HEADER_LEN + total_len:
        return None
    topic_len = int.from_bytes(buffer[4:6], "big")
    if topic_len < 1 or 2 + topic_len > total_len:
        raise ProtocolError("topic length %d inconsistent with frame length %d" % (topic_len, total_len))
    payload_len = total_len - 2 - topic_len
    if payload_len > MAX_PAYLOAD_BYTES:
        raise FrameSizeError("payload of %d bytes exceeds 16 MiB cap" % payload_len)
    topic_end = 6 + topic_len
    try:
        topic = bytes(buffer[6:topic_end]).decode()
    except UnicodeDecodeError as exc:
        raise ProtocolError("topic is not valid UTF-8") from exc
    validate_topic(topic)
    payload = bytes(buffer[topic_end:topic_end + payload_len])
    return (topic, payload), HEADER_LEN + total_len


class FrameDecoder:
    """Streaming decoder: feed byte chunks, get back complete frames."""

    def __init__(self):
        self._buffer = bytearray()

    def feed(self, data: bytes) -> list[tuple[str, bytes]]:
        self._buffer.extend(data)
        frames = []
        while True:
            decoded = decode_frame(self._buffer)
            if decoded is None:
                return frames
            frame, consumed = decoded
            frames.append(frame)
            del self._buffer[:consumed]

    @property
    def pending_bytes(self) -> int:
        return len(self._buffer)
