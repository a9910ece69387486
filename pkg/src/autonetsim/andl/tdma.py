"""Feasible-schedule generation for time-triggered streams.

First-fit heuristic: flows are placed in ascending period order; each
flow's per-link windows are offset by the cumulative upstream transmission
durations plus switch processing delays, and the whole pattern is shifted
to the earliest phase that avoids overlap on every link it touches.  The
result is a valid starting point, not an optimum.
"""

from __future__ import annotations

from bisect import bisect_left, insort
from dataclasses import dataclass
from math import gcd

from ..kernel import SEC
from ..ethernet import TdmaSchedule, TdmaWindow


class ScheduleInfeasible(Exception):
    pass


class CycleTooLong(Exception):
    pass


@dataclass(frozen=True)
class TtFlow:
    flow_id: str
    ct_id: int
    period: int
    hops: tuple[tuple[str, int], ...]  # (directed link, frame duration)
    gaps: tuple[int, ...]              # processing delay between consecutive hops
    scheduled_release: bool = True     # False for flush-driven aggregate streams


def _lcm(values) -> int:
    out = 1
    for v in values:
        out = out * v // gcd(out, v)
    return out


def _overlaps(intervals: list[tuple[int, int]], start: int, end: int) -> bool:
    idx = bisect_left(intervals, (end, end))
    if idx > 0 and intervals[idx - 1][1] > start:
        return True
    if idx < len(intervals) and intervals[idx][0] < end:
        return True
    return False


def generate_tdma_schedule(
    flows: list[TtFlow], cycle_cap: int = 10 * SEC
) -> tuple[TdmaSchedule, dict[str, list[int]]]:
    """Place windows for every flow; returns the schedule and, per flow,
    the release offsets of its first hop inside the cycle."""
    if not flows:
        return TdmaSchedule(1, []), {}
    cycle = _lcm([f.period for f in flows])
    if cycle > cycle_cap:
        raise CycleTooLong(f"schedule cycle {cycle} ticks exceeds cap {cycle_cap}")
    placed: dict[str, list[tuple[int, int]]] = {}
    windows: list[TdmaWindow] = []
    releases: dict[str, list[int]] = {}

    for flow in sorted(flows, key=lambda f: (f.period, f.ct_id, f.flow_id)):
        period = flow.period
        instances = cycle // period
        upstream = [0]
        for k in range(1, len(flow.hops)):
            prev_link, prev_dur = flow.hops[k - 1]
            upstream.append(upstream[k - 1] + prev_dur + flow.gaps[k - 1])

        candidates = {0}
        for k, (link, dur) in enumerate(flow.hops):
            for start, end in placed.get(link, ()):
                candidates.add((end - upstream[k]) % period)
            candidates.add((-upstream[k]) % period)
            candidates.add((cycle - dur - upstream[k]) % period)

        chosen = None
        for shift in sorted(candidates):
            tentative: dict[str, list[tuple[int, int]]] = {}
            ok = True
            for j in range(instances):
                for k, (link, dur) in enumerate(flow.hops):
                    start = (j * period + shift + upstream[k]) % cycle
                    end = start + dur
                    if end > cycle:
                        ok = False
                        break
                    existing = placed.get(link, [])
                    if _overlaps(existing, start, end):
                        ok = False
                        break
                    mine = tentative.setdefault(link, [])
                    if _overlaps(mine, start, end):
                        ok = False
                        break
                    insort(mine, (start, end))
                if not ok:
                    break
            if ok:
                chosen = (shift, tentative)
                break
        if chosen is None:
            raise ScheduleInfeasible(
                f"no feasible offset for flow {flow.flow_id} (ct {flow.ct_id})"
            )
        shift, tentative = chosen
        for link, intervals in tentative.items():
            dest = placed.setdefault(link, [])
            for iv in intervals:
                insort(dest, iv)
        for j in range(instances):
            for k, (link, dur) in enumerate(flow.hops):
                start = (j * period + shift + upstream[k]) % cycle
                windows.append(TdmaWindow(flow.ct_id, link, start, dur))
        releases[flow.flow_id] = sorted(
            (j * period + shift) % cycle for j in range(instances)
        )

    schedule = TdmaSchedule(cycle, windows)
    assert not schedule.violations(), "generated schedule violates its own invariants"
    return schedule, releases
