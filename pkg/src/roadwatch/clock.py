"""Millisecond clocks: a real one and a simulated one.

Connectivity churn, retry backoff, and session replay are all driven
through this interface so tests and the demo can run on simulated time
and stay reproducible.
"""

from __future__ import annotations

import time


class SimClock:
    """Manually advanced clock; sleep() jumps time forward instantly."""

    def __init__(self, start_ms: int = 0):
        self._now_ms = start_ms

    def now_ms(self) -> int:
        return self._now_ms

    def sleep_ms(self, duration_ms: int) -> None:
        if duration_ms < 0:
            raise ValueError("cannot sleep a negative duration")
        self._now_ms += duration_ms

    def advance_to(self, t_ms: int) -> None:
        if t_ms < self._now_ms:
            raise ValueError(f"cannot move clock backwards ({t_ms} < {self._now_ms})")
        self._now_ms = t_ms


class WallClock:
    def now_ms(self) -> int:
        return time.time_ns() // 1_000_000

    def sleep_ms(self, duration_ms: int) -> None:
        time.sleep(duration_ms / 1000.0)

    def advance_to(self, t_ms: int) -> None:
        delta = t_ms - self.now_ms()
        if delta > 0:
            time.sleep(delta / 1000.0)
