import random

import pytest
from hypothesis import given, settings, strategies as st

from autonetsim.andl.tdma import (
    CycleTooLong, ScheduleInfeasible, TtFlow, generate_tdma_schedule,
)
from autonetsim.kernel import MS, SEC, US


def flow(fid, ct, period, hops, gaps=()):
    return TtFlow(fid, ct, period, tuple(hops), tuple(gaps))


def test_single_message_single_link():
    sched, releases = generate_tdma_schedule([
        flow("m1:a", 1, 1 * MS, [("x->y", 6_720_000)]),
    ])
    assert sched.cycle_length == 1 * MS
    (w,) = sched.windows
    assert (w.offset, w.duration) == (0, 6_720_000)
    assert releases["m1:a"] == [0]


def test_two_messages_share_link_without_overlap():
    sched, _ = generate_tdma_schedule([
        flow("m1:a", 1, 1 * MS, [("x->y", 6_720_000)]),
        flow("m2:a", 2, 1 * MS, [("x->y", 6_720_000)]),
    ])
    ws = sorted(sched.windows_for("x->y"), key=lambda w: w.offset)
    assert [w.offset for w in ws] == [0, 6_720_000]
    assert sched.violations() == []


def test_multihop_alignment_includes_processing_delay():
    sched, _ = generate_tdma_schedule([
        flow("m:a", 7, 1 * MS, [("a->s", 6_720_000), ("s->b", 6_720_000)], [8 * US]),
    ])
    first = sched.windows_for("a->s")[0]
    second = sched.windows_for("s->b")[0]
    assert second.offset == first.offset + first.duration + 8 * US


def test_overutilized_link_infeasible():
    with pytest.raises(ScheduleInfeasible):
        generate_tdma_schedule([
            flow("m1:a", 1, 1 * MS, [("x->y", 600 * US)]),
            flow("m2:a", 2, 1 * MS, [("x->y", 600 * US)]),
        ])


def test_cycle_cap():
    with pytest.raises(CycleTooLong):
        generate_tdma_schedule([
            flow("m1:a", 1, 7 * SEC, [("x->y", 10 * US)]),
            flow("m2:a", 2, 9 * SEC, [("x->y", 10 * US)]),
        ])


def test_mixed_periods_instances():
    sched, releases = generate_tdma_schedule([
        flow("fast:a", 1, 1 * MS, [("x->y", 50 * US)]),
        flow("slow:a", 2, 4 * MS, [("x->y", 50 * US)]),
    ])
    assert sched.cycle_length == 4 * MS
    assert len([w for w in sched.windows if w.ct_id == 1]) == 4
    assert len(releases["fast:a"]) == 4
    assert sched.violations() == []


@settings(deadline=None, max_examples=60)
@given(st.data())
def test_randomized_schedules_satisfy_invariants(data):
    rng = random.Random(data.draw(st.integers(0, 10**6)))
    links = ["a->s", "s->b", "s->c"]
    flows = []
    for i in range(rng.randint(1, 8)):
        period = rng.choice([1 * MS, 2 * MS, 4 * MS, 8 * MS])
        n_hops = rng.randint(1, 2)
        if n_hops == 1:
            hops = [(rng.choice(links), rng.choice([10, 50, 120]) * US)]
            gaps = []
        else:
            dur = rng.choice([10, 50, 120]) * US
            hops = [("a->s", dur), (rng.choice(["s->b", "s->c"]), dur)]
            gaps = [8 * US]
        flows.append(flow(f"f{i}:r", i, period, hops, gaps))
    try:
        sched, releases = generate_tdma_schedule(flows)
    except ScheduleInfeasible:
        return
    assert sched.violations() == []
    for f in flows:
        assert len(releases[f.flow_id]) == sched.cycle_length // f.period


def test_empty_input():
    sched, releases = generate_tdma_schedule([])
    assert sched.windows == [] and releases == {}
