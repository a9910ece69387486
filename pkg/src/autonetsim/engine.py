"""Runtime assembly: turn a NetworkConfig into live simulation components.

The engine wires buses, switch ports, gateways, stimuli and sinks to the
event kernel, runs to the horizon, and (by default) drains in-flight
frames afterwards: periodic sources stop at the horizon, so delivery
counts line up with creation counts while bandwidth windows stay clamped
to the horizon.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .can import CanBus, CanFrame, NodeCanPort
from .config import NetworkConfig
from .ethernet import (
    AVB, BE, RC, TT, DEFAULT_HW_DELAY, EthFrame, EthPort, Switch,
    TdmaSchedule, TdmaWindow, pad_payload, tt_receive_check,
)
from .gateway import DEFAULT_PROCESSING_DELAY, Gateway, RouteDest
from .kernel import Event, EventKind, Oscillator, Simulator, parse_duration
from .metrics import MetricStore, RecordingFlags


def _tag_from_dict(b: dict):
    kind = b["kind"]
    if kind == "tt":
        return TT(b["ct"])
    if kind == "rc":
        return RC(b["vl"], b["bag"])
    if kind == "avb":
        return AVB(b["stream"], b.get("class", "A"))
    if kind == "be":
        return BE(b.get("priority", 0))
    raise ValueError(f"not an Ethernet binding: {b!r}")


class Host:
    """An end node: consumes frames, checks TT windows, records latency."""

    def __init__(self, sim: Simulator, store: MetricStore, name: str,
                 schedule: TdmaSchedule | None, tolerance: int):
        self.sim = sim
        self.store = store
        self.name = name
        self.schedule = schedule
        self.tolerance = tolerance
        self.subs: set[str] = set()
        self.nic: EthPort | None = None

    def receive(self, frame: EthFrame, now: int, port: EthPort) -> None:
        if isinstance(frame.tag, TT) and self.schedule is not None:
            if self.schedule.windows_for(port.link) and not tt_receive_check(
                self.schedule, port.link, frame.tag.ct_id, now, self.tolerance
            ):
                self.store.scalar_add(self.name, f"ttViolations[{frame.tag.ct_id}]", 1, "frames")
                return
        if frame.records:
            for record in frame.records:
                if record.message in self.subs:
                    self.store.add_latency(record.message, self.name, record.creation, now)
        elif frame.message in self.subs:
            self.store.add_latency(frame.message, self.name, frame.creation_time, now)

    def on_can_rx(self, frame: CanFrame, now: int) -> None:
        if frame.message in self.subs:
            self.store.add_latency(frame.message, self.name, frame.creation_time, now)


class CanSource:
    """Periodic CAN stimulus feeding a node's controller."""

    def __init__(self, rt: "Runtime", node: str, port: NodeCanPort, bus: CanBus,
                 message: str, can_id: int, payload: int, period: int, offset: int):
        self.rt = rt
        self.port = port
        self.bus = bus
        self.message = message
        self.can_id = can_id
        self.payload = bytes(payload)
        self.period = period
        self.path = f"{node}.src[{message}]"
        rt.sim.register(self.path, self._fire)
        rt.sim.schedule(offset, self.path, EventKind.FIRE_SOURCE)

    def _fire(self, ev: Event) -> None:
        now = ev.time
        frame = CanFrame(self.can_id, self.payload, self.bus.name, now, self.message)
        self.port.submit(frame)
        self.bus.notify(now)
        nxt = now + self.period
        if self.rt.stop_time is None or nxt <= self.rt.stop_time:
            self.rt.sim.schedule(nxt, self.path, EventKind.FIRE_SOURCE)


class EthSource:
    """Periodic Ethernet stimulus (RC, AVB, or best effort)."""

    def __init__(self, rt: "Runtime", node: str, port: EthPort, message: str,
                 emissions: list[tuple[str, object]], payload: int, period: int, offset: int):
        self.rt = rt
        self.port = port
        self.node = node
        self.message = message
        self.emissions = emissions  # (dst, tag) per frame each period
        self.payload = payload
        self.period = period
        self.path = f"{node}.src[{message}]"
        rt.sim.register(self.path, self._fire)
        rt.sim.schedule(offset, self.path, EventKind.FIRE_SOURCE)

    def _fire(self, ev: Event) -> None:
        now = ev.time
        for dst, tag in self.emissions:
            frame = EthFrame(
                src=self.node, dst=dst, payload_len=pad_payload(self.payload),
                tag=tag, creation_time=now, message=self.message,
                logical_len=self.payload,
            )
            self.port.enqueue(frame, now)
        nxt = now + self.period
        if self.rt.stop_time is None or nxt <= self.rt.stop_time:
            self.rt.sim.schedule(nxt, self.path, EventKind.FIRE_SOURCE)


class TtSource:
    """Time-triggered talker releasing at its scheduled window offsets."""

    def __init__(self, rt: "Runtime", node: str, port: EthPort, message: str,
                 receiver: str, dst: str, ct_id: int, payload: int,
                 cycle: int, releases: list[int], osc: Oscillator):
        self.rt = rt
        self.port = port
        self.node = node
        self.message = message
        self.dst = dst
        self.ct_id = ct_id
        self.payload = payload
        self.cycle = cycle
        self.osc = osc
        self.path = f"{node}.src[{message}:{receiver}]"
        rt.sim.register(self.path, self._fire)
        for offset in releases:
            rt.sim.schedule(max(0, osc.local_to_ideal(offset)), self.path,
                            EventKind.TT_RELEASE, offset)

    def _fire(self, ev: Event) -> None:
        now = ev.time
        frame = EthFrame(
            src=self.node, dst=self.dst, payload_len=pad_payload(self.payload),
            tag=TT(self.ct_id), creation_time=now, message=self.message,
            logical_len=self.payload,
        )
        self.port.enqueue(frame, now)
        nominal = ev.payload + self.cycle
        if self.rt.stop_time is None or nominal <= self.rt.stop_time:
            self.rt.sim.schedule(
                max(now, self.osc.local_to_ideal(nominal)), self.path,
                EventKind.TT_RELEASE, nominal,
            )


@dataclass
class RunResult:
    events: int
    final_time: int
    deliveries: dict[str, int]
    link_frames: dict[str, int]
    drops: int


class Runtime:
    """Everything needed to execute one compiled scenario once."""

    def __init__(self, cfg: NetworkConfig, seed: int | None = None):
        self.cfg = cfg
        flags = RecordingFlags(**{
            k: cfg.metric_flags.get(k, True)
            for k in ("queues", "credit", "completions", "stations")
        })
        self.store = MetricStore(flags)
        self.sim = Simulator(seed if seed is not None else cfg.seed)
        self.stop_time: int | None = None
        self.hosts: dict[str, Host] = {}
        self.buses: dict[str, CanBus] = {}
        self.switches: dict[str, Switch] = {}
        self.gateways: dict[str, Gateway] = {}
        self.ports: dict[str, EthPort] = {}
        self.node_can_ports: dict[tuple[str, str], NodeCanPort] = {}
        self.sources: list = []
        self.schedule: TdmaSchedule | None = None
        self.oscillators: dict[str, Oscillator] = {}
        self._build()

    # -- construction -------------------------------------------------------

    def _device_duration(self, dev, key: str, default: int) -> int:
        raw = dev.params.get(key)
        return parse_duration(raw) if raw else default

    def _build(self) -> None:
        cfg = self.cfg
        if cfg.schedule and cfg.schedule.windows:
            self.schedule = TdmaSchedule(
                cfg.schedule.cycle,
                [TdmaWindow(w.ct_id, w.link, w.offset, w.duration) for w in cfg.schedule.windows],
            )
        for dev in cfg.devices:
            drift = dev.params.get("driftPpm", "0")
            self.oscillators[dev.name] = Oscillator(Fraction(drift))
            if dev.kind == "switch":
                self.switches[dev.name] = Switch(
                    self.sim, self.store, dev.name,
                    self._device_duration(dev, "hardwareDelay", DEFAULT_HW_DELAY),
                )
            elif dev.kind == "gateway":
                self.gateways[dev.name] = Gateway(
                    self.sim, self.store, dev.name,
                    self._device_duration(dev, "processingDelay", DEFAULT_PROCESSING_DELAY),
                )
            elif dev.kind == "node":
                self.hosts[dev.name] = Host(
                    self.sim, self.store, dev.name, None, cfg.tt_tolerance
                )
        for bus_cfg in cfg.buses:
            self.buses[bus_cfg.name] = CanBus(
                self.sim, self.store, bus_cfg.name, bus_cfg.bitrate,
                bus_cfg.segment, cfg.can_stuffing,
            )

        def endpoint(name: str):
            return self.hosts.get(name) or self.switches.get(name) or self.gateways.get(name)

        for link in cfg.links:
            for owner, peer in ((link.a, link.b), (link.b, link.a)):
                slopes = cfg.slopes.get(f"{owner}->{peer}", {})
                port = EthPort(
                    self.sim, self.store, owner, peer, link.rate,
                    capacity=cfg.queue_capacity, schedule=self.schedule,
                    idle_slope_a=slopes.get("A", 0), idle_slope_b=slopes.get("B", 0),
                )
                port.peer = endpoint(peer)
                self.ports[port.link] = port
                owner_obj = endpoint(owner)
                if isinstance(owner_obj, Switch):
                    owner_obj.ports.append(port)
                elif isinstance(owner_obj, Gateway):
                    if owner_obj.eth_port is None:
                        owner_obj.eth_port = port
                        owner_obj.eth_segment = link.segment
                elif isinstance(owner_obj, Host) and owner_obj.nic is None:
                    owner_obj.nic = port
        for host in self.hosts.values():
            host.schedule = self.schedule

        for bus_cfg in cfg.buses:
            bus = self.buses[bus_cfg.name]
            for name in bus_cfg.attached:
                if name in self.gateways:
                    self.gateways[name].attach_bus(bus)
                else:
                    port = NodeCanPort(name)
                    port.on_rx = self.hosts[name].on_can_rx
                    bus.attach(port)
                    self.node_can_ports[(name, bus.name)] = port

        for pool_cfg in cfg.pools:
            self.gateways[pool_cfg.gateway].add_pool(pool_cfg.name, pool_cfg.holdup_by_id)

        for rule in cfg.rules:
            dests = [self._dest_from_dict(d) for d in rule.dests]
            gw = self.gateways[rule.gateway]
            if rule.can_id is not None:
                gw.add_can_rule(rule.segment, rule.can_id, dests)
            else:
                gw.add_key_rule(rule.segment, tuple(rule.key), dests)

        for fwd in cfg.forwarding:
            sw = self.switches[fwd.switch]
            ports = [self.ports[f"{fwd.switch}->{peer}"] for peer in fwd.ports]
            sw.add_route(tuple(fwd.key), ports)

        self._build_stimuli()

    def _dest_from_dict(self, d: dict) -> RouteDest:
        tag = _tag_from_dict(d["tag"]) if d.get("tag") else None
        return RouteDest(
            kind=d["kind"], pool=d.get("pool"), tag=tag,
            dst=tuple(d.get("dst", ())), bus=d.get("bus"), can_id=d.get("can_id"),
        )

    def _edge_info(self, u: str, v: str) -> tuple | None:
        for link in self.cfg.links:
            if {link.a, link.b} == {u, v}:
                return ("eth", link.name, link.segment)
        for bus in self.cfg.buses:
            if bus.name in (u, v) and (u in bus.attached or v in bus.attached):
                return ("can", bus.name, bus.segment)
        return None

    def _build_stimuli(self) -> None:
        for msg in self.cfg.messages:
            first_path = msg.paths[msg.receivers[0]]
            first_edge = self._edge_info(first_path[0], first_path[1])
            if first_edge is None:
                raise ValueError(f"message {msg.name}: broken path")
            if first_edge[0] == "can":
                bus = self.buses[first_edge[1]]
                can_id = msg.bindings[first_edge[2]]["id"]
                port = self.node_can_ports[(msg.sender, bus.name)]
                self.sources.append(CanSource(
                    self, msg.sender, port, bus, msg.name, can_id,
                    msg.payload, msg.period, msg.offset,
                ))
            else:
                host = self.hosts[msg.sender]
                if host.nic is None:
                    raise ValueError(f"message {msg.name}: sender {msg.sender} has no Ethernet port")
                binding = msg.bindings[first_edge[2]]
                if binding["kind"] == "tt":
                    for receiver in msg.receivers:
                        releases = (self.cfg.schedule.releases or {}).get(f"{msg.name}:{receiver}")
                        if not releases:
                            raise ValueError(f"message {msg.name}: no TT releases for {receiver}")
                        dst = self._run_end(msg.paths[receiver])
                        self.sources.append(TtSource(
                            self, msg.sender, host.nic, msg.name, receiver, dst,
                            binding["ct"], msg.payload, self.cfg.schedule.cycle,
                            releases, self.oscillators[msg.sender],
                        ))
                else:
                    tag = _tag_from_dict(binding)
                    if binding["kind"] == "rc":
                        emissions = [(self._run_end(first_path), tag)]
                    else:
                        emissions = []
                        for r in msg.receivers:
                            emission = (self._run_end(msg.paths[r]), tag)
                            if emission not in emissions:
                                emissions.append(emission)
                    self.sources.append(EthSource(
                        self, msg.sender, host.nic, msg.name, emissions,
                        msg.payload, msg.period, msg.offset,
                    ))
            # sinks
            for receiver in msg.receivers:
                path = msg.paths[receiver]
                last_edge = self._edge_info(path[-2], path[-1])
                if last_edge[0] == "can":
                    can_id = msg.bindings[last_edge[2]]["id"]
                    port = self.node_can_ports.get((receiver, last_edge[1]))
                    if port is not None:
                        port.subscriptions.add(can_id)
                self.hosts[receiver].subs.add(msg.name)

    def _run_end(self, path: list[str]) -> str:
        """End of the first Ethernet run: the next gateway or the receiver."""
        for vertex in path[1:]:
            if vertex in self.gateways or vertex == path[-1]:
                return vertex
        return path[-1]

    # -- execution ------------------------------------------------------------

    def run(self, horizon: int, drain: bool = True) -> RunResult:
        self.stop_time = horizon
        self.store.run_window = (0, horizon)
        summary = self.sim.run_until(horizon)
        events = summary.events_dispatched
        final = summary.final_time
        self.store.freeze_window_totals()
        if drain:
            extra = self.sim.run_to_completion()
            events += extra.events_dispatched
            final = max(final, extra.final_time)
        deliveries = {
            f"{message}@{sink}": len(samples)
            for (message, sink), samples in sorted(self.store.latencies.items())
        }
        drops = sum(
            value for (module, name), (value, _) in self.store.scalars.items()
            if name.startswith("drops[")
        )
        return RunResult(events, final, deliveries, dict(self.store.link_frames), drops)
