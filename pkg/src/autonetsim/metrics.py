"""Recording and export of run metrics.

Four families of results are kept: utilized bandwidth per link (wire bits
including every framing overhead), end-to-end latency per message and sink,
jitter derived from consecutive latencies, and queue occupancy plus drop
counts.  Vectors are ordered (time, value) series; scalars carry a unit.

Export is deterministic: identical runs produce byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .kernel import SEC


@dataclass(frozen=True)
class LatencySample:
    message: str
    sink: str
    creation: int
    arrival: int

    @property
    def latency(self) -> int:
        return self.arrival - self.creation


@dataclass(frozen=True)
class RecordingFlags:
    """Switches for high-volume series; scalars are always recorded."""

    queues: bool = True
    credit: bool = True
    completions: bool = True
    stations: bool = True


def _fmt_value(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, Fraction):
        # Credit values are bits scaled by 10^12; render exactly.
        if (10**12) % value.denominator == 0:
            scaled = value.numerator * ((10**12) // value.denominator)
            sign = "-" if scaled < 0 else ""
            scaled = abs(scaled)
            whole, frac = divmod(scaled, 10**12)
            return f"{sign}{whole}.{frac:012d}"
        return repr(float(value))
    return repr(value)


class MetricStore:
    """Vectors and scalars keyed by (module path, series name)."""

    def __init__(self, flags: RecordingFlags | None = None):
        self.flags = flags or RecordingFlags()
        self.vectors: dict[tuple[str, str], list[tuple[int, object]]] = {}
        self.scalars: dict[tuple[str, str], tuple[object, str]] = {}
        self.latencies: dict[tuple[str, str], list[LatencySample]] = {}
        # Per-link wire-bit accounting; completions kept for windowed queries.
        self.link_bits: dict[str, int] = {}
        self.link_frames: dict[str, int] = {}
        self.link_completions: dict[str, list[tuple[int, int]]] = {}
        self.run_window: tuple[int, int] | None = None
        self._window_bits: dict[str, int] | None = None

    # -- raw recording -------------------------------------------------

    def vec(self, module: str, name: str, t: int, value) -> None:
        points = self.vectors.setdefault((module, name), [])
        if points and t < points[-1][0]:
            raise ValueError(f"timestamps must be non-decreasing in {module}.{name}")
        points.append((t, value))

    def scalar_set(self, module: str, name: str, value, unit: str = "") -> None:
        self.scalars[(module, name)] = (value, unit)

    def scalar_add(self, module: str, name: str, amount=1, unit: str = "") -> None:
        old = self.scalars.get((module, name), (0, unit))[0]
        self.scalars[(module, name)] = (old + amount, unit)

    def scalar(self, module: str, name: str, default=0):
        return self.scalars.get((module, name), (default, ""))[0]

    # -- latency -------------------------------------------------------

    def add_latency(self, message: str, sink: str, creation: int, arrival: int) -> None:
        sample = LatencySample(message, sink, creation, arrival)
        if sample.latency < 0:
            raise ValueError(f"negative latency for {message} at {sink}")
        self.latencies.setdefault((message, sink), []).append(sample)
        self.vec(f"{sink}.app[{message}]", "rxLatency", arrival, sample.latency)

    def station_latency(self, station: str, message: str, creation: int, arrival: int) -> None:
        if self.flags.stations:
            self.vec(f"{station}.rx[{message}]", "rxLatency", arrival, arrival - creation)

    def latency_stats(self, message: str, sink: str) -> tuple[int, int, int, float]:
        """Return (count, min, max, mean) latency in ticks."""
        samples = self.latencies.get((message, sink), [])
        if not samples:
            return (0, 0, 0, 0.0)
        values = [s.latency for s in samples]
        return (len(values), min(values), max(values), sum(values) / len(values))

    def jitter(self, message: str, sink: str) -> int:
        """Max |difference| between consecutive latencies; 0 below 2 samples."""
        samples = self.latencies.get((message, sink), [])
        if len(samples) < 2:
            return 0
        return max(
            abs(b.latency - a.latency) for a, b in zip(samples, samples[1:])
        )

    # -- queues ----------------------------------------------------------

    def record_queue(self, module: str, queue: str, t: int, occupancy: int) -> None:
        if self.flags.queues:
            self.vec(module, f"QueueLength[{queue}]", t, occupancy)

    def count_drop(self, module: str, queue: str, reason: str = "overflow") -> None:
        self.scalar_add(module, f"drops[{queue}]", 1, "frames")
        self.scalar_add(module, f"drops.{reason}", 1, "frames")

    # -- bandwidth -------------------------------------------------------

    def link_completed(self, link: str, t: int, wire_bits: int) -> None:
        self.link_bits[link] = self.link_bits.get(link, 0) + wire_bits
        self.link_frames[link] = self.link_frames.get(link, 0) + 1
        if self.flags.completions:
            self.link_completions.setdefault(link, []).append((t, wire_bits))

    def freeze_window_totals(self) -> None:
        """Snapshot per-link totals at the end of the run window so frames
        completing during the post-horizon drain are not counted."""
        self._window_bits = dict(self.link_bits)

    def utilized_bandwidth(self, link: str, t0: int | None = None, t1: int | None = None) -> float:
        """Wire bits per second of frames whose transmission completed in
        the half-open window (t0, t1]; frames still queued never count."""
        if t0 is None or t1 is None:
            if self.run_window is None:
                raise ValueError("no window given and run_window unset")
            t0, t1 = self.run_window
        if t1 <= t0:
            raise ValueError("window must have t1 > t0")
        if self.flags.completions:
            bits = sum(b for t, b in self.link_completions.get(link, ()) if t0 < t <= t1)
        elif self.run_window is not None and (t0, t1) == self.run_window:
            totals = self._window_bits if self._window_bits is not None else self.link_bits
            bits = totals.get(link, 0)
        else:
            raise ValueError("windowed bandwidth needs completion recording")
        return bits * SEC / (t1 - t0)

    # -- export ----------------------------------------------------------

    def export_csv(self, outdir: str | Path) -> list[Path]:
        """One CSV per vector plus a scalars.csv; returns written paths."""
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for (module, name) in sorted(self.vectors):
            path = out / f"{module}.{name}.csv"
            lines = ["time_ps,value"]
            lines += [f"{t},{_fmt_value(v)}" for t, v in self.vectors[(module, name)]]
            path.write_text("\n".join(lines) + "\n")
            written.append(path)
        path = out / "scalars.csv"
        lines = ["module,name,value,unit"]
        for (module, name) in sorted(self.scalars):
            value, unit = self.scalars[(module, name)]
            lines.append(f"{module},{name},{_fmt_value(value)},{unit}")
        path.write_text("\n".join(lines) + "\n")
        written.append(path)
        return written

    def to_document(self) -> dict:
        doc: dict = {"vectors": {}, "scalars": {}, "links": {}}
        for (module, name) in sorted(self.vectors):
            doc["vectors"][f"{module}.{name}"] = [
                [t, _fmt_value(v)] for t, v in self.vectors[(module, name)]
            ]
        for (module, name) in sorted(self.scalars):
            value, unit = self.scalars[(module, name)]
            doc["scalars"][f"{module}.{name}"] = {"value": _fmt_value(value), "unit": unit}
        for link in sorted(self.link_bits):
            doc["links"][link] = {
                "wire_bits": self.link_bits[link],
                "frames": self.link_frames[link],
            }
        if self.run_window:
            doc["window"] = list(self.run_window)
        return doc

    def export_json(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_document(), indent=1, sort_keys=True) + "\n")
        return path
