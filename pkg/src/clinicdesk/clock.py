"""Injected wall-clock. Nothing in the service reads ambient time directly,
so every time-dependent behaviour (booking horizon, reminder windows,
session expiry) is testable under a manual clock."""

from __future__ import annotations

from datetime import datetime, timedelta


class Clock:
    """Interface: anything with a ``now() -> datetime`` method."""

    def now(self) -> datetime:
        raise NotImplementedError

    def today(self):
        return self.now().date()


class SystemClock(Clock):
    """Clinic-local wall clock (naive datetimes, single-site deployment)."""

    def now(self) -> datetime:
        return datetime.now()


class ManualClock(Clock):
    """Settable clock for tests and simulations."""

    def __init__(self, start: datetime):
        self._now = start

    def now(self) -> datetime:
        return self._now

    def set(self, value: datetime) -> None:
        self._now = value

    def advance(self, **delta) -> datetime:
        self._now += timedelta(**delta)
        return self._now
