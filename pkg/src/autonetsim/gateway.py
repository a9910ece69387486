"""CAN<->Ethernet gateway: path finding, pooling, and transformation.

A gateway routes by a static table; frames without a matching rule are
dropped and counted.  CAN records bound for Ethernet are buffered in pools:
every record carries a hold-up time, the pool deadline is the minimum of
``arrival + hold-up`` over its content, and expiry releases everything that
has arrived so far into a single Ethernet frame per destination (split only
when the encoding would exceed the maximum payload).  The aggregate payload
layout is fixed:

    [record count: 2 bytes BE] then per record
    [id: 2 bytes BE (11 bits used)] [dlc: 1 byte] [payload: dlc bytes]

zero-padded up to the 46-byte Ethernet minimum.  The gateway processing
delay is charged once per traversal, on the egress side.
"""

from __future__ import annotations

from dataclasses import dataclass

from .can import CanFrame, GatewayCanPort
from .ethernet import ETH_MAX_PAYLOAD, EthFrame, pad_payload
from .kernel import MS, US, Event, EventKind, Simulator
from .metrics import MetricStore

DEFAULT_PROCESSING_DELAY = 40 * US   # measured CAN-Ethernet gateway
LEGACY_CENTRAL_DELAY = 60 * US       # legacy central CAN gateway

RECORD_HEADER = 3   # 2-byte id + 1-byte dlc
COUNT_PREFIX = 2


class MalformedAggregate(ValueError):
    pass


@dataclass(frozen=True)
class CanRecord:
    can_id: int
    payload: bytes
    message: str | None = None
    creation: int = 0


def encode_records(records: list[CanRecord]) -> bytes:
    """Encode records into one aggregate payload (caller checks the size)."""
    out = bytearray(len(records).to_bytes(COUNT_PREFIX, "big"))
    for r in records:
        out += r.can_id.to_bytes(2, "big")
        out.append(len(r.payload))
        out += r.payload
    if len(out) < 46:
        out += bytes(46 - len(out))
    return bytes(out)


def decode_records(payload: bytes) -> list[tuple[int, bytes]]:
    """Inverse of encode_records; padding is skipped by dlc accounting."""
    if len(payload) < COUNT_PREFIX:
        raise MalformedAggregate("payload shorter than the record count prefix")
    count = int.from_bytes(payload[:COUNT_PREFIX], "big")
    pos = COUNT_PREFIX
    out = []
    for _ in range(count):
        if pos + RECORD_HEADER > len(payload):
            raise MalformedAggregate("truncated record header")
        can_id = int.from_bytes(payload[pos : pos + 2], "big")
        if can_id > 2047:
            raise MalformedAggregate(f"record id {can_id} exceeds 11 bits")
        dlc = payload[pos + 2]
        if dlc > 8:
            raise MalformedAggregate(f"record dlc {dlc} exceeds 8 bytes")
        if pos + RECORD_HEADER + dlc > len(payload):
            raise MalformedAggregate("record payload does not tile the frame")
        out.append((can_id, payload[pos + RECORD_HEADER : pos + RECORD_HEADER + dlc]))
        pos += RECORD_HEADER + dlc
    return out


def split_records(records: list[CanRecord]) -> list[list[CanRecord]]:
    """Greedy FIFO split so every chunk encodes within the maximum payload."""
    chunks: list[list[CanRecord]] = []
    current: list[CanRecord] = []
    size = COUNT_PREFIX
    for r in records:
        need = RECORD_HEADER + len(r.payload)
        if current and size + need > ETH_MAX_PAYLOAD:
            chunks.append(current)
            current, size = [], COUNT_PREFIX
        current.append(r)
        size += need
    if current:
        chunks.append(current)
    return chunks


def compute_holdup(
    can_id: int,
    period: int,
    policy: str = "config1",
    explicit: dict[int, int] | None = None,
) -> int:
    """Hold-up time for a CAN id under one of the id-band policies.

    An explicit per-id entry always wins over the banded policy.
    """
    if explicit is not None and can_id in explicit:
        return explicit[can_id]
    if policy == "config2" and can_id < 101:
        return 1 * MS
    if policy in ("config1", "config2"):
        if can_id < 101:
            return 0
        if can_id <= 200:
            return period // 4
        if can_id <= 300:
            return period // 2
        return (3 * period) // 4
    raise ValueError(f"unknown hold-up policy {policy!r}")


# --------------------------------------------------------------------------
# Routing
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RouteDest:
    """One forwarding action of a routing rule."""

    kind: str                 # "pool" | "eth" | "can"
    pool: str | None = None   # pool id for kind == "pool"
    tag: object | None = None  # egress traffic-class tag for Ethernet emission
    dst: tuple[str, ...] = ()  # destination node(s) for Ethernet emission
    bus: str | None = None    # destination bus for CAN emission
    can_id: int | None = None  # id on the destination bus (None keeps the id)


@dataclass
class PoolEntry:
    record: CanRecord
    arrival: int
    dests: tuple[str, ...]
    tag: object


class Pool:
    """Aggregation buffer with per-message hold-up times."""

    def __init__(
        self,
        sim: Simulator,
        store: MetricStore,
        gateway: str,
        pool_id: str,
        holdup_by_id: dict[int, int],
        on_flush,
        default_holdup: int = 0,
    ):
        self.sim = sim
        self.store = store
        self.pool_id = pool_id
        self.path = f"{gateway}.pool.{pool_id}"
        self.holdup_by_id = dict(holdup_by_id)
        self.default_holdup = default_holdup
        self.on_flush = on_flush
        self.buffered: list[PoolEntry] = []
        self.deadline: int | None = None
        self._timer = None
        sim.register(self.path, self._handle)

    def holdup(self, can_id: int) -> int:
        return self.holdup_by_id.get(can_id, self.default_holdup)

    def insert(self, record: CanRecord, now: int, dests: tuple[str, ...], tag) -> None:
        self.buffered.append(PoolEntry(record, now, dests, tag))
        candidate = now + self.holdup(record.can_id)
        if self.deadline is None or candidate < self.deadline:
            self.deadline = candidate
            if self._timer is not None:
                self.sim.cancel(self._timer)
            self._timer = self.sim.schedule(candidate, self.path, EventKind.POOL_FLUSH, False)
        self.store.record_queue(self.path, "pool", now, len(self.buffered))

    def _handle(self, ev: Event) -> None:
        if ev.kind is not EventKind.POOL_FLUSH:
            return
        if ev.payload is False:
            # Re-arm once behind any same-tick arrivals so a frame landing
            # exactly at the deadline is still included (FIFO order).
            self._timer = self.sim.schedule(ev.time, self.path, EventKind.POOL_FLUSH, True)
            return
        self.flush(ev.time)

    def flush(self, now: int) -> None:
        if not self.buffered:
            self.deadline = None
            self._timer = None
            return
        entries = self.buffered
        self.buffered = []
        self.deadline = None
        self._timer = None
        for e in entries:
            self.store.vec(self.path, "holdUpTime", now, now - e.arrival)
        self.store.record_queue(self.path, "pool", now, 0)
        self.on_flush(entries, now)


class Gateway:
    """Gateway node tying router, pools, and transformation together."""

    def __init__(
        self,
        sim: Simulator,
        store: MetricStore,
        name: str,
        processing_delay: int = DEFAULT_PROCESSING_DELAY,
    ):
        self.sim = sim
        self.store = store
        self.name = name
        self.processing_delay = processing_delay
        self.can_rules: dict[tuple[str, int], list[RouteDest]] = {}
        self.key_rules: dict[tuple[str, tuple], list[RouteDest]] = {}
        self.pools: dict[str, Pool] = {}
        self.can_ports: dict[str, GatewayCanPort] = {}
        self.buses: dict[str, object] = {}
        self.eth_port = None
        self.eth_segment = "backbone"
        sim.register(name, self._handle)

    # -- wiring -----------------------------------------------------------

    def attach_bus(self, bus) -> GatewayCanPort:
        port = GatewayCanPort(self.name, bus.name, self.store)
        port.on_rx = lambda frame, now, _bus=bus: self.on_can_rx(_bus, frame, now)
        bus.attach(port)
        self.can_ports[bus.name] = port
        self.buses[bus.name] = bus
        return port

    def add_pool(self, pool_id: str, holdup_by_id: dict[int, int]) -> Pool:
        pool = Pool(
            self.sim, self.store, self.name, pool_id, holdup_by_id,
            on_flush=self._flush_to_ethernet,
        )
        self.pools[pool_id] = pool
        return pool

    def add_can_rule(self, segment: str, can_id: int, dests: list[RouteDest]) -> None:
        self.can_rules[(segment, can_id)] = dests
        for port in self.can_ports.values():
            bus = self.buses[port.bus]
            if bus.segment == segment:
                port.subscriptions.add(can_id)

    def add_key_rule(self, segment: str, key: tuple, dests: list[RouteDest]) -> None:
        self.key_rules[(segment, key)] = dests

    # -- routing ------------------------------------------------------------

    def route(self, segment: str, frame) -> list[RouteDest]:
        """Destinations of the matching rule; empty means drop (counted)."""
        if isinstance(frame, CanFrame):
            return self.can_rules.get((segment, frame.can_id), [])
        from .ethernet import route_key

        return self.key_rules.get((segment, route_key(frame)), [])

    # -- CAN ingress ----------------------------------------------------------

    def on_can_rx(self, bus, frame: CanFrame, now: int) -> None:
        if frame.message is not None:
            self.store.station_latency(self.name, frame.message, frame.creation_time, now)
        dests = self.can_rules.get((bus.segment, frame.can_id))
        if not dests:
            self.store.count_drop(self.name, "router", reason="no_rule")
            return
        record = CanRecord(frame.can_id, frame.payload, frame.message, frame.creation_time)
        for d in dests:
            if d.kind == "pool":
                self.pools[d.pool].insert(record, now, d.dst, d.tag)
            elif d.kind == "eth":
                self._emit_aggregates([PoolEntry(record, now, d.dst, d.tag)], now)
            elif d.kind == "can":
                out = CanFrame(
                    d.can_id if d.can_id is not None else frame.can_id,
                    frame.payload, d.bus, frame.creation_time, frame.message,
                )
                self.sim.schedule(
                    now + self.processing_delay, self.name,
                    EventKind.GW_CAN_EGRESS, (d.bus, [out]),
                )

    # -- pool flush / Ethernet egress -------------------------------------------

    def _flush_to_ethernet(self, entries: list[PoolEntry], now: int) -> None:
        self._emit_aggregates(entries, now)

    def _emit_aggregates(self, entries: list[PoolEntry], now: int) -> None:
        dests: list[str] = []
        for e in entries:
            for d in e.dests:
                if d not in dests:
                    dests.append(d)
        tag = entries[0].tag
        records = [e.record for e in entries]
        frames = []
        for dst in dests:
            for chunk in split_records(records):
                payload = encode_records(chunk)
                frame = EthFrame(
                    src=self.name, dst=dst, payload_len=pad_payload(len(payload)),
                    tag=tag, creation_time=now, message=None, records=chunk,
                )
                frames.append(frame)
                self.store.vec(self.name, "aggregateCount", now, len(chunk))
        self.sim.schedule(
            now + self.processing_delay, self.name, EventKind.GW_ETH_EGRESS, frames
        )

    # -- Ethernet ingress ----------------------------------------------------

    def receive(self, frame: EthFrame, now: int, port=None) -> None:
        if frame.message is not None:
            self.store.station_latency(self.name, frame.message, frame.creation_time, now)
        for record in frame.records or ():
            if record.message is not None:
                self.store.station_latency(self.name, record.message, record.creation, now)
        segment = self.eth_segment
        if frame.records:
            # Aggregate: route each embedded record on its own.
            batches: dict[str, list[CanFrame]] = {}
            for record in frame.records:
                dests = self.can_rules.get((segment, record.can_id))
                if not dests:
                    self.store.count_drop(self.name, "router", reason="no_rule")
                    continue
                for d in dests:
                    if d.kind == "can":
                        out = CanFrame(
                            d.can_id if d.can_id is not None else record.can_id,
                            record.payload, d.bus, record.creation, record.message,
                        )
                        batches.setdefault(d.bus, []).append(out)
                    elif d.kind == "eth":
                        self._emit_aggregates([PoolEntry(record, now, d.dst, d.tag)], now)
            for bus_name, batch in batches.items():
                self.sim.schedule(
                    now + self.processing_delay, self.name,
                    EventKind.GW_CAN_EGRESS, (bus_name, batch),
                )
            return
        dests = self.route(segment, frame)
        if not dests:
            self.store.count_drop(self.name, "router", reason="no_rule")
            return
        for d in dests:
            if d.kind == "can":
                payload = bytes(min(8, frame.logical_len or 8))
                out = CanFrame(d.can_id, payload, d.bus, frame.creation_time, frame.message)
                self.sim.schedule(
                    now + self.processing_delay, self.name,
                    EventKind.GW_CAN_EGRESS, (d.bus, [out]),
                )
            elif d.kind == "eth":
                fwd = EthFrame(
                    src=self.name, dst=d.dst[0] if d.dst else frame.dst,
                    payload_len=frame.payload_len, tag=d.tag,
                    creation_time=frame.creation_time, message=frame.message,
                    records=frame.records, logical_len=frame.logical_len,
                )
                self.sim.schedule(
                    now + self.processing_delay, self.name, EventKind.GW_ETH_EGRESS, [fwd]
                )

    # -- deferred egress events -------------------------------------------------

    def _handle(self, ev: Event) -> None:
        if ev.kind is EventKind.GW_ETH_EGRESS:
            for frame in ev.payload:
                self.eth_port.enqueue(frame, ev.time)
        elif ev.kind is EventKind.GW_CAN_EGRESS:
            bus_name, batch = ev.payload
            self.can_ports[bus_name].place_batch(batch, ev.time)
            self.buses[bus_name].notify(ev.time)
