"""Circuit breaker, exponential back-off retry, and call timeouts.

These are the per-call resilience wrappers services put around anything that
can fail or hang. The breaker counts consecutive failures and, once open,
rejects calls immediately until a cool-down lapses; the retry wrapper sleeps
through an exponential back-off schedule with jitter; ``with_timeout`` runs an
operation on a worker thread and abandons it when the limit passes.
"""

from __future__ import annotations

import logging
import random
import threading
from dataclasses import dataclass, field

from tollgrid.framekit.clock import SystemClock

logger = logging.getLogger(__name__)

CLOSED = "CLOSED"
OPEN = "OPEN"
HALF_OPEN = "HALF_OPEN"


class CircuitOpenError(Exception):
    """Raised instead of running the operation while the breaker is open."""

    def __init__(self, remaining_ms: int):
        super().__init__("circuit open, retry in %d ms" % remaining_ms)
        self.state = OPEN
        self.remaining_ms = remaining_ms


class CircuitBreaker:
    """Consecutive-failure breaker with a timed half-open probe.

    CLOSED: every call runs; a success resets the failure counter, a failure
    increments it, and hitting ``failure_threshold`` opens the breaker.
    OPEN: calls are rejected without running the operation until
    ``reset_timeout_ms`` has elapsed since opening.
    HALF_OPEN: exactly one probe call runs; success closes the breaker,
    failure re-opens it with a fresh cool-down.
    """

    def __init__(self, clock=None, failure_threshold: int = 5, reset_timeout_ms: int = 10_000, name: str = ""):
        if failure_threshold < 1:
            raise ValueError("failure_threshold must be >= 1")
        if reset_timeout_ms <= 0:
            raise ValueError("reset_timeout_ms must be positive")
        self._clock = clock if clock is not None else SystemClock()
        self.failure_threshold = failure_threshold
        self.reset_timeout_ms = reset_timeout_ms
        self.name = name
        self._lock = threading.Lock()
        self._state = CLOSED
        self._failures = 0
        self._opened_at_ms = 0
        self._probing = False

    def _effective_state_locked(self, now_ms: int) -> str:
        if self._state == OPEN and now_ms - self._opened_at_ms >= self.reset_timeout_ms:
            self._state = HALF_OPEN
        return self._state

    @property
    def state(self) -> str:
        with self._lock:
            return self._effective_state_locked(self._clock.now_ms())

    @property
    def consecutive_failures(self) -> int:
        with self._lock:
            return self._failures

    def call(self, operation):
        """Run ``operation`` under the breaker; its exceptions count as failure."""
        with self._lock:
            now = self._clock.now_ms()
            state = self._effective_state_locked(now)
            if state == OPEN:
                remaining = max(0, self._opened_at_ms + self.reset_timeout_ms - now)
                raise CircuitOpenError(remaining)
            probe = state == HALF_OPEN
            if probe:
                if self._probing:
                    # A probe is already in flight; reject like OPEN.
                    raise CircuitOpenError(self.reset_timeout_ms)
                self._probing = True
        try:
            result = operation()
        except Exception:
            self._record_failure(probe)
            raise
        self._record_success(probe)
        return result

    def _record_success(self, probe: bool) -> None:
        with self._lock:
            if probe:
                self._probing = False
                logger.info("breaker %s: probe succeeded, closing", self.name or "-")
            self._state = CLOSED
            self._failures = 0

    def _record_failure(self, probe: bool) -> None:
        with self._lock:
            now = self._clock.now_ms()
            if probe:
                self._probing = False
                self._state = OPEN
                self._opened_at_ms = now
                logger.warning("breaker %s: probe failed, re-opening", self.name or "-")
                return
            self._failures += 1
            if self._failures >= self.failure_threshold:
                self._state = OPEN
                self._opened_at_ms = now
                logger.warning(
                    "breaker %s: %d consecutive failures, opening for %d ms",
                    self.name or "-", self._failures, self.reset_timeout_ms,
                )


@dataclass
class RetryPolicy:
    max_attempts: int = 4
    base_delay_ms: float = 50.0
    multiplier: float = 2.0
    max_delay_ms: float = 2000.0
    jitter_fraction: float = 0.1

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if self.base_delay_ms < 0 or self.max_delay_ms < 0:
            raise ValueError("delays must be non-negative")
        if not 0.0 <= self.jitter_fraction < 1.0:
            raise ValueError("jitter_fraction must be in [0, 1)")

    def nominal_delay_ms(self, attempt: int) -> float:
        """Back-off before attempt ``attempt`` (1-based; attempt 1 is immediate)."""
        if attempt <= 1:
            return 0.0
        return min(self.base_delay_ms * self.multiplier ** (attempt - 2), self.max_delay_ms)


class RetryExhaustedError(Exception):
    """All attempts failed; the last failure is chained as ``__cause__``."""

    def __init__(self, attempts: int):
        super().__init__("operation failed after %d attempts" % attempts)
        self.attempts = attempts


@dataclass
class RetryOutcome:
    value: object
    attempts: int
    delays_ms: list = field(default_factory=list)


def retry(operation, policy: RetryPolicy | None = None, clock=None, rng: random.Random | None = None) -> RetryOutcome:
    """Call ``operation`` until it succeeds or attempts run out.

    The operation must be idempotent: it may run up to ``max_attempts`` times.
    Sleeps go through the injected clock, jitter through the injected RNG.
    """
    policy = policy if policy is not None else RetryPolicy()
    clock = clock if clock is not None else SystemClock()
    rng = rng if rng is not None else random.Random()
    delays: list[float] = []
    for attempt in range(1, policy.max_attempts + 1):
        if attempt > 1:
            nominal = policy.nominal_delay_ms(attempt)
            jittered = nominal * (1.0 + policy.jitter_fraction * (2.0 * rng.random() - 1.0))
            delay = min(jittered, policy.max_delay_ms)
            delays.append(delay)
            clock.sleep_ms(delay)
        try:
            value = operation()
        except Exception as exc:
            logger.debug("retry attempt %d/%d failed: %s", attempt, policy.max_attempts, exc)
            if attempt == policy.max_attempts:
                raise RetryExhaustedError(attempt) from exc
        else:
            return RetryOutcome(value, attempt, delays)
    raise AssertionError("unreachable")


class TimeoutExpired(Exception):
    """The operation did not finish within the limit (distinct from failing)."""

    def __init__(self, limit_ms: float):
        super().__init__("operation exceeded %.0f ms" % limit_ms)
        self.limit_ms = limit_ms


def with_timeout(operation, limit_ms: float):
    """Run ``operation`` on a worker thread, giving it ``limit_ms`` to finish.

    A late result is discarded: the worker keeps running but nobody reads its
    outcome. Exceptions raised by the operation propagate to the caller.
    """
    if limit_ms <= 0:
        raise ValueError("limit_ms must be positive")
    outcome: dict = {}
    done = threading.Event()

    def runner():
        try:
            outcome["value"] = operation()
        except BaseException as exc:  # propagate whatever the op raised
            outcome["error"] = exc
        finally:
            done.set()

    worker = threading.Thread(target=runner, name="with-timeout", daemon=True)
    worker.start()
    if not done.wait(limit_ms / 1000.0):
        raise TimeoutExpired(limit_ms)
    if "error" in outcome:
        raise outcome["error"]
    return outcome["value"]
