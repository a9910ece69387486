from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from autonetsim.kernel import MS, SEC, US
from autonetsim.metrics import MetricStore, RecordingFlags


def test_bandwidth_one_eth_frame_per_ms():
    store = MetricStore()
    for k in range(1000):
        store.link_completed("en1->s1", (k + 1) * MS, 672)
    assert store.utilized_bandwidth("en1->s1", 0, SEC) == 672_000.0


def test_bandwidth_one_can_frame_per_10ms():
    store = MetricStore()
    for k in range(100):
        store.link_completed("cb1", (k + 1) * 10 * MS, 111)
    assert store.utilized_bandwidth("cb1", 0, SEC) == 11_100.0


def test_bandwidth_empty_window_is_zero():
    store = MetricStore()
    store.link_completed("cb1", 5 * SEC, 111)
    assert store.utilized_bandwidth("cb1", 0, SEC) == 0.0


def test_bandwidth_queued_frames_excluded():
    store = MetricStore()
    store.link_completed("cb1", 10, 100)
    store.link_completed("cb1", 2 * SEC, 100)  # completes after the window
    assert store.utilized_bandwidth("cb1", 0, SEC) == 100.0


def test_bandwidth_additivity():
    store = MetricStore()
    for t, bits in ((3, 10), (SEC // 2, 20), (SEC - 1, 30), (SEC + 5, 40)):
        store.link_completed("l", t, bits)
    t0, t1, t2 = 0, SEC // 2, SEC
    whole = store.utilized_bandwidth("l", t0, t2)
    left = store.utilized_bandwidth("l", t0, t1)
    right = store.utilized_bandwidth("l", t1, t2)
    weighted = (left * (t1 - t0) + right * (t2 - t1)) / (t2 - t0)
    assert whole == pytest.approx(weighted)


def test_jitter_constant_latency():
    store = MetricStore()
    for k, lat in enumerate([5 * MS, 5 * MS, 5 * MS]):
        store.add_latency("m", "sink", k * MS, k * MS + lat)
    assert store.jitter("m", "sink") == 0


def test_jitter_max_consecutive_difference():
    store = MetricStore()
    for k, lat in enumerate([1 * MS, 3 * MS, 2 * MS]):
        store.add_latency("m", "sink", 10 * k * MS, 10 * k * MS + lat)
    assert store.jitter("m", "sink") == 2 * MS


def test_jitter_single_sample_is_zero():
    store = MetricStore()
    store.add_latency("m", "sink", 0, 5)
    assert store.jitter("m", "sink") == 0
    assert store.jitter("m", "nobody") == 0


def test_negative_latency_rejected():
    store = MetricStore()
    with pytest.raises(ValueError):
        store.add_latency("m", "sink", 10, 5)


def test_queue_recording_and_drops():
    store = MetricStore()
    store.record_queue("s1.port.en2", "BE[0]", 5, 1)
    store.record_queue("s1.port.en2", "BE[0]", 9, 2)
    store.count_drop("s1.port.en2", "BE[0]")
    points = store.vectors[("s1.port.en2", "QueueLength[BE[0]]")]
    assert points == [(5, 1), (9, 2)]
    assert store.scalar("s1.port.en2", "drops[BE[0]]") == 1


def test_csv_export_rows(tmp_path):
    store = MetricStore()
    store.vec("mod", "series", 1, 10)
    store.vec("mod", "series", 2, 20)
    written = store.export_csv(tmp_path)
    csv = (tmp_path / "mod.series.csv").read_text()
    assert csv == "time_ps,value\n1,10\n2,20\n"
    assert (tmp_path / "scalars.csv").read_text() == "module,name,value,unit\n"
    assert len(written) == 2


def test_empty_store_header_only(tmp_path):
    MetricStore().export_csv(tmp_path)
    assert (tmp_path / "scalars.csv").read_text().startswith("module,name,value,unit")


def test_json_and_csv_agree_and_are_deterministic(tmp_path):
    def build():
        store = MetricStore()
        store.add_latency("m", "sink", 0, 7)
        store.scalar_add("mod", "drops[RC]", 2, "frames")
        store.link_completed("l", 3, 672)
        return store

    a, b = build(), build()
    pa, pb = tmp_path / "a", tmp_path / "b"
    a.export_csv(pa)
    b.export_csv(pb)
    for fa in sorted(pa.iterdir()):
        assert fa.read_bytes() == (pb / fa.name).read_bytes()
    a.export_json(tmp_path / "a.json")
    b.export_json(tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_latency_stats():
    store = MetricStore()
    for k, lat in enumerate([10, 30, 20]):
        store.add_latency("m", "sink", k * 100, k * 100 + lat)
    n, lo, hi, mean = store.latency_stats("m", "sink")
    assert (n, lo, hi, mean) == (3, 10, 30, 20.0)


def test_station_recording_flag():
    store = MetricStore(RecordingFlags(stations=False))
    store.station_latency("s1", "m", 0, 5)
    assert not store.vectors


@given(st.lists(st.integers(min_value=0, max_value=10**9), min_size=2, max_size=40))
def test_jitter_matches_bruteforce(latencies):
    store = MetricStore()
    t = 0
    for lat in latencies:
        store.add_latency("m", "x", t, t + lat)
        t += 10**9
    brute = max(abs(b - a) for a, b in zip(latencies, latencies[1:]))
    assert store.jitter("m", "x") == brute
