"""Clocks and RNG wiring shared by the engine, ledger and simulator.

Production uses the system clock and the OS CSPRNG. Tests and the
deterministic simulator inject a manual clock and a seeded generator so
that whole scenario runs are reproducible byte for byte.
"""

from __future__ import annotations

import random
from datetime import datetime, timedelta, timezone


class SystemClock:
    """UTC wall clock truncated to whole seconds."""

    def now(self) -> datetime:
        return datetime.now(timezone.utc).replace(microsecond=0)


class ManualClock:
    """Clock advanced by hand, optionally auto-ticking on every read.

    With ``autotick`` > 0 each now() call returns the current time and then
    moves forward, so repeated runs of the same call sequence produce the
    same timestamp sequence.
    """

    def __init__(self, start: datetime | None = None, autotick: int = 0):
        self._now = (start or datetime(2021, 6, 1, tzinfo=timezone.utc)).replace(microsecond=0)
        self.autotick = autotick

    def now(self) -> datetime:
        current = self._now
        if self.autotick:
            self._now += timedelta(seconds=self.autotick)
        return current

    def advance(self, seconds: float) -> None:
        self._now += timedelta(seconds=seconds)

    def set(self, ts: datetime) -> None:
        self._now = ts.replace(microsecond=0)


def make_rng(seed: int | None):
    """Seeded generator for deterministic runs, CSPRNG otherwise."""
    if seed is None:
        return random.SystemRandom()
    return random.Random(seed)
