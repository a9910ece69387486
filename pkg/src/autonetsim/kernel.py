"""Discrete-event simulation core.

Simulation time is an integer count of picosecond ticks.  One picosecond
divides both CAN bit times (2 us at 500 kbit/s) and Ethernet bit times
(10 ns at 100 Mbit/s) exactly, so every transmission duration used by the
models is representable without rounding drift.

Events are dispatched in strict (time, seq) order where seq is a global
insertion counter; two runs over the same configuration therefore produce
identical event traces.  Randomness, when a model asks for it, comes from
a single seeded generator owned by the simulator.
"""

from __future__ import annotations

import heapq
import random
import re
from dataclasses import dataclass
from enum import Enum, auto
from fractions import Fraction
from typing import Any, Callable

# Tick multipliers (1 tick = 1 ps).
PS = 1
NS = 1_000
US = 1_000_000
MS = 1_000_000_000
SEC = 1_000_000_000_000

# Scheduled times must stay inside a signed 64-bit tick counter.
MAX_TICKS = 2**63 - 1


class SimulationError(Exception):
    """Base class for simulator faults."""


class SchedulingInPast(SimulationError):
    """An event was scheduled before the current simulation time."""


class SimTimeOverflow(SimulationError):
    """A time value left the signed 64-bit tick range."""


_DURATION_RE = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*(ps|ns|us|ms|s)\s*$")
_RATE_RE = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*(G|M|k)?(?:b|bit)/s\s*$")
_BYTES_RE = re.compile(r"^\s*(\d+)\s*B\s*$")

_DURATION_UNITS = {"ps": PS, "ns": NS, "us": US, "ms": MS, "s": SEC}
_RATE_PREFIX = {None: 1, "k": 10**3, "M": 10**6, "G": 10**9}


def parse_duration(text: str) -> int:
    """Parse a duration like ``2ms`` or ``125us`` into ticks."""
    m = _DURATION_RE.match(text)
    if not m:
        raise ValueError(f"not a duration: {text!r}")
    value = Fraction(m.group(1)) * _DURATION_UNITS[m.group(2)]
    if value.denominator != 1:
        raise ValueError(f"duration {text!r} is not a whole number of ticks")
    return int(value)


def parse_rate(text: str) -> int:
    """Parse a rate like ``100Mb/s`` or ``500kb/s`` into bits per second."""
    m = _RATE_RE.match(text)
    if not m:
        raise ValueError(f"not a rate: {text!r}")
    value = Fraction(m.group(1)) * _RATE_PREFIX[m.group(2)]
    if value.denominator != 1:
        raise ValueError(f"rate {text!r} is not a whole number of bits per second")
    return int(value)


def parse_byte_count(text: str) -> int:
    """Parse a payload size like ``46B`` into bytes."""
    m = _BYTES_RE.match(text)
    if not m:
        raise ValueError(f"not a byte count: {text!r}")
    return int(m.group(1))


def fmt_duration(ticks: int) -> str:
    """Render ticks with the largest unit that divides them evenly."""
    for unit, factor in (("s", SEC), ("ms", MS), ("us", US), ("ns", NS)):
        if ticks and ticks % factor == 0:
            return f"{ticks // factor}{unit}"
    return f"{ticks}ps"


def check_time(ticks: int) -> int:
    if not 0 <= ticks <= MAX_TICKS:
        raise SimTimeOverflow(f"time {ticks} outside [0, 2^63-1] ticks")
    return ticks


class EventKind(Enum):
    """Tags naming what an event means to its target module."""

    TIMER = auto()
    FIRE_SOURCE = auto()
    TT_RELEASE = auto()
    CAN_ARBITRATE = auto()
    CAN_TX_DONE = auto()
    PORT_TRY_SEND = auto()
    PORT_TX_DONE = auto()
    SWITCH_FORWARD = auto()
    POOL_FLUSH = auto()
    GW_CAN_EGRESS = auto()
    GW_ETH_EGRESS = auto()


class Event:
    """A scheduled occurrence; also serves as its own cancellation handle."""

    __slots__ = ("time", "seq", "target", "kind", "payload", "cancelled")

    def __init__(self, time: int, seq: int, target: str, kind: EventKind, payload: Any):
        self.time = time
        self.seq = seq
        self.target = target
        self.kind = kind
        self.payload = payload
        self.cancelled = False

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"Event(t={self.time}, seq={self.seq}, target={self.target}, kind={self.kind.name})"


@dataclass(frozen=True)
class RunSummary:
    events_dispatched: int
    final_time: int


class Simulator:
    """Future-event-list engine with integer time and FIFO tie-breaking."""

    def __init__(self, seed: int = 0, trace: bool = False):
        self.now: int = 0
        self.rng = random.Random(seed)
        self._heap: list[tuple[int, int, Event]] = []
        self._seq = 0
        self._handlers: dict[str, Callable[[Event], None]] = {}
        self.trace: list[tuple[int, int, str, str]] | None = [] if trace else None

    def register(self, path: str, handler: Callable[[Event], None]) -> None:
        """Bind a module path to its event handler."""
        if path in self._handlers:
            raise ValueError(f"module path already registered: {path}")
        self._handlers[path] = handler

    def schedule(self, time: int, target: str, kind: EventKind, payload: Any = None) -> Event:
        """Insert an event into the future event list and return its handle."""
        check_time(time)
        if time < self.now:
            raise SchedulingInPast(
                f"event for {target} at {time} is before current time {self.now}"
            )
        self._seq += 1
        ev = Event(time, self._seq, target, kind, payload)
        heapq.heappush(self._heap, (time, ev.seq, ev))
        return ev

    def cancel(self, event: Event) -> None:
        """Mark an event dead; it is skipped (not counted) at dispatch time."""
        event.cancelled = True

    def _dispatch(self, ev: Event) -> None:
        self.now = ev.time
        handler = self._handlers.get(ev.target)
        if handler is None:
            raise SimulationError(f"event targets unregistered module {ev.target!r}")
        if self.trace is not None:
            self.trace.append((ev.time, ev.seq, ev.target, ev.kind.name))
        handler(ev)

    def run_until(self, t_end: int) -> RunSummary:
        """Dispatch every event with time <= t_end (inclusive horizon).

        Afterwards the current time equals t_end even if the event list
        emptied earlier.
        """
        check_time(t_end)
        if t_end < self.now:
            raise SchedulingInPast(f"horizon {t_end} is before current time {self.now}")
        dispatched = 0
        heap = self._heap
        while heap and heap[0][0] <= t_end:
            _, _, ev = heapq.heappop(heap)
            if ev.cancelled:
                continue
            self._dispatch(ev)
            dispatched += 1
        self.now = t_end
        return RunSummary(dispatched, self.now)

    def run_to_completion(self) -> RunSummary:
        """Dispatch until the event list is empty (used to drain in-flight work)."""
        dispatched = 0
        heap = self._heap
        while heap:
            _, _, ev = heapq.heappop(heap)
            if ev.cancelled:
                continue
            self._dispatch(ev)
            dispatched += 1
        return RunSummary(dispatched, self.now)

    def pending(self) -> int:
        return sum(1 for _, _, ev in self._heap if not ev.cancelled)


def _round_half_away(x: Fraction) -> int:
    """Round to the nearest integer, ties away from zero."""
    if x >= 0:
        return int((2 * x + 1) // 2)
    return -int((-2 * x + 1) // 2)


class Oscillator:
    """Constant-rate inaccurate clock.

    A local clock running fast by ``drift_ppm`` parts per million sees
    ``(10^6 + drift_ppm)`` of its own ticks per ``10^6`` ideal ticks.  The
    mapping between local and ideal time is monotone and bijective for any
    |drift_ppm| < 10^6, and drift 0 is the identity.
    """

    def __init__(self, drift_ppm: int | Fraction = 0, reference_offset: int = 0):
        drift = Fraction(drift_ppm)
        if abs(drift) >= 10**6:
            raise ValueError("|drift_ppm| must be < 10^6")
        self.drift_ppm = drift
        self.reference_offset = reference_offset

    def local_to_ideal(self, local: int) -> int:
        if local < 0:
            raise ValueError("local time must be >= 0")
        ideal = Fraction(local) * 10**6 / (10**6 + self.drift_ppm)
        return self.reference_offset + _round_half_away(ideal)

    def ideal_to_local(self, ideal: int) -> int:
        local = Fraction(ideal - self.reference_offset) * (10**6 + self.drift_ppm) / 10**6
        return _round_half_away(local)
