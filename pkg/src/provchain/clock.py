import time
from typing import Protocol


class Clock(Protocol):
    def now(self) -> int:
        """Milliseconds since the epoch."""
        ...


class SystemClock:
    def now(self) -> int:
        return time.time_ns() // 1_000_000


class SteppingClock:
    """Deterministic clock: start, start + step, start + 2*step, ...

    Reads never go backwards, so a stepping clock can be resumed past the
    ledger tip with ``resume_after``.
    """

    def __init__(self, start_ms: int, step_ms: int = 1):
        if step_ms <= 0:
            raise ValueError("step_ms must be positive")
        self.step_ms = step_ms
        self._next = start_ms

    def now(self) -> int:
        value = self._next
        self._next += self.step_ms
        return value

    def advance(self, ms: int) -> None:
        self._next += ms

    def resume_after(self, timestamp: int | None) -> None:
        if timestamp is not None and self._next <= timestamp:
            self._next = timestamp + self.step_ms
