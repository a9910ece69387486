import pytest

from autonetsim.can import (
    CanBus, CanFrame, GatewayCanPort, NodeCanPort, arbitrate,
    can_frame_duration, can_wire_bits, worst_case_stuff_bits,
)
from autonetsim.kernel import US, Simulator
from autonetsim.metrics import MetricStore


def test_frame_duration_examples():
    assert can_frame_duration(8, 500_000) == 222 * US   # 111 bits
    assert can_frame_duration(0, 500_000) == 94 * US    # 47 overhead bits only
    assert can_frame_duration(6, 500_000) == 190 * US   # 95 bits


def test_wire_bits_and_stuffing():
    assert can_wire_bits(8) == 111
    assert worst_case_stuff_bits(8) == (34 + 64) // 4
    assert can_frame_duration(8, 500_000, stuffing=True) == (111 + 24) * 2 * US


def test_frame_invariants():
    with pytest.raises(ValueError):
        CanFrame(4096, b"", "cb1", 0)
    with pytest.raises(ValueError):
        CanFrame(1, bytes(9), "cb1", 0)


def test_arbitrate_lowest_id():
    frames = [
        (331, 0, CanFrame(331, b"x", "cb1", 0)),
        (17, 1, CanFrame(17, b"y", "cb1", 0)),
        (510, 2, CanFrame(510, b"z", "cb1", 0)),
    ]
    assert arbitrate(frames).can_id == 17
    assert arbitrate([frames[2]]).can_id == 510
    assert arbitrate([]) is None


def bus_fixture(bitrate=500_000):
    sim = Simulator()
    store = MetricStore()
    bus = CanBus(sim, store, "cb1", bitrate, "canbus")
    return sim, store, bus


class Sink:
    def __init__(self):
        self.got = []

    def __call__(self, frame, now):
        self.got.append((frame.can_id, now))


def test_same_instant_release_serializes_by_priority():
    sim, _, bus = bus_fixture()
    p1, p2, rx = NodeCanPort("n1"), NodeCanPort("n2"), NodeCanPort("rx")
    sink = Sink()
    rx.on_rx = sink
    rx.subscriptions |= {100, 200}
    for p in (p1, p2, rx):
        bus.attach(p)
    p2.submit(CanFrame(200, bytes(8), "cb1", 0))
    p1.submit(CanFrame(100, bytes(8), "cb1", 0))
    bus.notify(0)
    sim.run_until(10_000 * US)
    dur = can_frame_duration(8, 500_000)
    assert sink.got == [(100, dur), (200, 2 * dur)]


def test_frame_arriving_mid_transmission_waits():
    sim, _, bus = bus_fixture()
    p1, p2, rx = NodeCanPort("n1"), NodeCanPort("n2"), NodeCanPort("rx")
    sink = Sink()
    rx.on_rx = sink
    rx.subscriptions |= {5, 900}
    for p in (p1, p2, rx):
        bus.attach(p)
    p1.submit(CanFrame(900, bytes(8), "cb1", 0))
    bus.notify(0)
    sim.run_until(10 * US)
    # higher-priority frame shows up mid-transmission; no preemption
    p2.submit(CanFrame(5, bytes(8), "cb1", sim.now))
    bus.notify(sim.now)
    sim.run_until(10_000 * US)
    dur = can_frame_duration(8, 500_000)
    assert sink.got == [(900, dur), (5, 2 * dur)]


def test_equal_id_tie_broken_by_node_index():
    sim, _, bus = bus_fixture()
    p1, p2, rx = NodeCanPort("n1"), NodeCanPort("n2"), NodeCanPort("rx")
    sink = Sink()
    rx.on_rx = sink
    rx.subscriptions.add(50)
    for p in (p1, p2, rx):
        bus.attach(p)
    p2.submit(CanFrame(50, b"b", "cb1", 0, message="from_n2"))
    p1.submit(CanFrame(50, b"a", "cb1", 0, message="from_n1"))
    bus.notify(0)
    sim.run_until(10_000 * US)
    assert len(sink.got) == 2  # nothing lost, deterministic order


def test_conservation_on_error_free_bus():
    sim, _, bus = bus_fixture()
    tx = NodeCanPort("n1")
    sinks = []
    ports = [tx]
    for i in range(3):
        p = NodeCanPort(f"rx{i}")
        s = Sink()
        p.on_rx = s
        p.subscriptions.add(10)
        sinks.append(s)
        ports.append(p)
    for p in ports:
        bus.attach(p)
    n = 25
    for k in range(n):
        tx.submit(CanFrame(10, bytes(4), "cb1", 0))
    bus.notify(0)
    sim.run_until(10**12)
    assert bus.sent == n
    assert all(len(s.got) == n for s in sinks)
    assert bus.delivered == 3 * n


def test_gateway_port_batch_overwrite():
    store = MetricStore()
    port = GatewayCanPort("gw1", "cb2", store)
    f = lambda i: CanFrame(i, bytes(2), "cb2", 0)
    port.place_batch([f(10), f(10), f(20)], 0)
    # same-batch records of one id stay queued in order
    assert len(port.slots[10]) == 2 and len(port.slots[20]) == 1
    # a later batch overwrites what is still pending for that id
    port.place_batch([f(10)], 5)
    assert len(port.slots[10]) == 1
    assert store.scalar("gw1.canif[cb2]", "overwrites") == 2
    best = port.best()
    assert best[0] == 10
    port.take(best[2])
    assert port.best()[0] == 20
