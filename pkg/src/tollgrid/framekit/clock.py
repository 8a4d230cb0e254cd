"""Injectable clocks.

Every time-dependent component in this package takes a clock object so tests
can control time. A clock provides wall-clock milliseconds/microseconds and a
sleep; ``FakeClock`` turns sleeps into instantaneous advances.
"""

from __future__ import annotations

import time


class SystemClock:
    """Real time, real sleeping."""

    def now_ms(self) -> int:
        return time.time_ns() // 1_000_000

    def now_us(self) -> int:
        return time.time_ns() // 1_000

    def sleep_ms(self, ms: float) -> None:
        if ms > 0:
            time.sleep(ms / 1000.0)


class FakeClock:
    """Manually advanced clock; ``sleep_ms`` advances instead of blocking."""

    def __init__(self, start_ms: int = 0):
        self._us = int(start_ms) * 1000

    def now_ms(self) -> int:
        return self._us // 1000

    def now_us(self) -> int:
        return self._us

    def advance_ms(self, ms: float) -> None:
        self._us += int(ms * 1000)

    def sleep_ms(self, ms: float) -> None:
        self.advance_ms(ms)
