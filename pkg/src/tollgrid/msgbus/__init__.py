"""Embedded pub/sub message bus: wire format, broker, and client."""

from tollgrid.msgbus.broker import (
    DEFAULT_HOST,
    DEFAULT_PORT,
    DEFAULT_SUB_CAPACITY,
    Broker,
    BrokerStats,
)
from tollgrid.msgbus.client import BusClient, BusError, Subscription
from tollgrid.msgbus.frame import (
    CONTROL_PREFIX,
    MAX_PAYLOAD_BYTES,
    SUBSCRIBE_ACK_TOPIC,
    FrameDecoder,
    FrameSizeError,
    ProtocolError,
    decode_frame,
    encode_frame,
    validate_topic,
)

__all__ = [
    "CONTROL_PREFIX",
    "DEFAULT_HOST",
    "DEFAULT_PORT",
    "DEFAULT_SUB_CAPACITY",
    "MAX_PAYLOAD_BYTES",
    "SUBSCRIBE_ACK_TOPIC",
    "Broker",
    "BrokerStats",
    "BusClient",
    "BusError",
    "FrameDecoder",
    "FrameSizeError",
    "ProtocolError",
    "Subscription",
    "decode_frame",
    "encode_frame",
    "validate_topic",
]
