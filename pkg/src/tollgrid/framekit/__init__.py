"""Shared microservice infrastructure: clocks, registry, resilience, tracing."""

from tollgrid.framekit.clock import FakeClock, SystemClock
from tollgrid.framekit.health import HealthServer
from tollgrid.framekit.registry import (
    DEFAULT_TTL_MS,
    Registry,
    ServiceRecord,
    UnknownInstanceError,
)
from tollgrid.framekit.resilience import (
    CLOSED,
    HALF_OPEN,
    OPEN,
    CircuitBreaker,
    CircuitOpenError,
    RetryExhaustedError,
    RetryOutcome,
    RetryPolicy,
    TimeoutExpired,
    retry,
    with_timeout,
)
from tollgrid.framekit.tracing import STAGES, TraceContext, TraceError, new_trace_id

__all__ = [
    "CLOSED",
    "DEFAULT_TTL_MS",
    "HALF_OPEN",
    "OPEN",
    "STAGES",
    "CircuitBreaker",
    "CircuitOpenError",
    "FakeClock",
    "HealthServer",
    "Registry",
    "RetryExhaustedError",
    "RetryOutcome",
    "RetryPolicy",
    "ServiceRecord",
    "SystemClock",
    "TimeoutExpired",
    "TraceContext",
    "TraceError",
    "UnknownInstanceError",
    "new_trace_id",
    "retry",
    "with_timeout",
]
