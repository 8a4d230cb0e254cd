"""HTTP gateway exposing live system state, registry, and sim control."""

from tollgrid.gateway.app import (
    DEFAULT_EVENT_QUEUE_CAP,
    DEFAULT_ROUTE_HISTORY,
    Gateway,
    eur_2dp,
)

__all__ = [
    "DEFAULT_EVENT_QUEUE_CAP",
    "DEFAULT_ROUTE_HISTORY",
    "Gateway",
    "eur_2dp",
]
