"""Compiled scenario description.

A NetworkConfig is the self-contained output of the network-description
compiler: devices, links, buses, message flows, gateway routing rules,
pools, switch forwarding tables, the TDMA schedule, and override layers.
It serializes to a stable-key-order JSON document (see README for the
schema) so identical sources compile to identical bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

from .kernel import parse_duration, parse_rate


@dataclass
class DeviceCfg:
    name: str
    kind: str  # node | switch | gateway | canLink | ethernetLink
    params: dict[str, str] = field(default_factory=dict)


@dataclass
class LinkCfg:
    name: str
    a: str
    b: str
    rate: int  # bits/s
    segment: str


@dataclass
class BusCfg:
    name: str
    bitrate: int
    segment: str
    attached: list[str] = field(default_factory=list)  # order = arbitration tie index


@dataclass
class MessageCfg:
    name: str
    sender: str
    receivers: list[str]
    payload: int  # bytes
    period: int   # ticks
    offset: int = 0
    bindings: dict[str, dict] = field(default_factory=dict)   # segment -> binding
    gateways: list[str] = field(default_factory=list)
    pools: dict[str, dict] = field(default_factory=dict)      # gateway -> {pool, holdUp}
    paths: dict[str, list[str]] = field(default_factory=dict)  # receiver -> vertices


@dataclass
class PoolCfg:
    gateway: str
    name: str
    holdup_by_id: dict[int, int] = field(default_factory=dict)


@dataclass
class RuleCfg:
    gateway: str
    segment: str
    can_id: int | None = None
    key: list | None = None          # e.g. ["tt", 102]
    dests: list[dict] = field(default_factory=list)


@dataclass
class ForwardCfg:
    switch: str
    key: list = field(default_factory=list)
    ports: list[str] = field(default_factory=list)  # egress peers


@dataclass
class WindowCfg:
    ct_id: int
    link: str
    offset: int
    duration: int


@dataclass
class ScheduleCfg:
    cycle: int
    windows: list[WindowCfg] = field(default_factory=list)
    releases: dict[str, list[int]] = field(default_factory=dict)  # "msg:receiver" -> offsets


@dataclass
class NetworkConfig:
    name: str
    devices: list[DeviceCfg] = field(default_factory=list)
    links: list[LinkCfg] = field(default_factory=list)
    buses: list[BusCfg] = field(default_factory=list)
    segments: dict[str, str] = field(default_factory=dict)  # segment -> can|ethernet
    messages: list[MessageCfg] = field(default_factory=list)
    pools: list[PoolCfg] = field(default_factory=list)
    rules: list[RuleCfg] = field(default_factory=list)
    forwarding: list[ForwardCfg] = field(default_factory=list)
    schedule: ScheduleCfg | None = None
    slopes: dict[str, dict] = field(default_factory=dict)  # link -> {"A": b/s, "B": b/s}
    ini: list[list[str]] = field(default_factory=list)     # [key, value] pairs, in order
    extras: dict[str, str] = field(default_factory=dict)   # unknown override keys
    warnings: list[str] = field(default_factory=list)
    seed: int = 0
    queue_capacity: int = 512
    tt_tolerance: int = 0
    can_stuffing: bool = False
    metric_flags: dict[str, bool] = field(default_factory=dict)

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        doc = asdict(self)
        for pool in doc["pools"]:
            pool["holdup_by_id"] = {str(k): v for k, v in pool["holdup_by_id"].items()}
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "NetworkConfig":
        cfg = cls(name=doc["name"])
        cfg.devices = [DeviceCfg(**d) for d in doc.get("devices", [])]
        cfg.links = [LinkCfg(**d) for d in doc.get("links", [])]
        cfg.buses = [BusCfg(**d) for d in doc.get("buses", [])]
        cfg.segments = dict(doc.get("segments", {}))
        cfg.messages = [MessageCfg(**d) for d in doc.get("messages", [])]
        cfg.pools = [
            PoolCfg(p["gateway"], p["name"], {int(k): v for k, v in p["holdup_by_id"].items()})
            for p in doc.get("pools", [])
        ]
        cfg.rules = [RuleCfg(**d) for d in doc.get("rules", [])]
        cfg.forwarding = [ForwardCfg(**d) for d in doc.get("forwarding", [])]
        sched = doc.get("schedule")
        if sched:
            cfg.schedule = ScheduleCfg(
                sched["cycle"],
                [WindowCfg(**w) for w in sched["windows"]],
                dict(sched.get("releases", {})),
            )
        cfg.slopes = {k: dict(v) for k, v in doc.get("slopes", {}).items()}
        cfg.ini = [list(p) for p in doc.get("ini", [])]
        cfg.extras = dict(doc.get("extras", {}))
        cfg.warnings = list(doc.get("warnings", []))
        cfg.seed = doc.get("seed", 0)
        cfg.queue_capacity = doc.get("queue_capacity", 512)
        cfg.tt_tolerance = doc.get("tt_tolerance", 0)
        cfg.can_stuffing = doc.get("can_stuffing", False)
        cfg.metric_flags = dict(doc.get("metric_flags", {}))
        return cfg

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "NetworkConfig":
        return cls.from_dict(json.loads(text))

    # -- lookup helpers ---------------------------------------------------

    def device(self, name: str) -> DeviceCfg | None:
        for d in self.devices:
            if d.name == name:
                return d
        return None

    def device_param(self, name: str, key: str, default: str | None = None) -> str | None:
        dev = self.device(name)
        if dev is None:
            return default
        return dev.params.get(key, default)


_BOOL = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def apply_override(cfg: NetworkConfig, key: str, value: str) -> bool:
    """Apply one dotted override key; returns False when the key is unknown.

    Precedence is handled by call order: generated defaults, then inline-ini
    pairs, then command-line pairs.
    """
    value = value.strip()
    parts = key.strip().split(".")
    if parts[0] == "sim" and len(parts) == 2:
        if parts[1] == "seed":
            cfg.seed = int(value)
            return True
        if parts[1] == "queueCapacity":
            cfg.queue_capacity = int(value)
            return True
        if parts[1] == "ttTolerance":
            cfg.tt_tolerance = parse_duration(value)
            return True
        if parts[1] == "canStuffing":
            cfg.can_stuffing = _BOOL[value.lower()]
            return True
        return False
    if parts[0] == "metrics" and len(parts) == 2:
        if parts[1] in ("queues", "credit", "completions", "stations"):
            cfg.metric_flags[parts[1]] = _BOOL[value.lower()]
            return True
        return False
    if parts[0] == "port" and len(parts) == 4 and parts[3] in ("idleSlopeA", "idleSlopeB"):
        link = f"{parts[1]}->{parts[2]}"
        cls = parts[3][-1]
        cfg.slopes.setdefault(link, {})[cls] = parse_rate(value)
        return True
    if len(parts) == 2:
        target, param = parts
        dev = cfg.device(target)
        if dev is not None:
            dev.params[param] = value
            if dev.kind == "ethernetLink" and param == "bandwidth":
                for link in cfg.links:
                    if link.name == target:
                        link.rate = parse_rate(value)
            if dev.kind == "canLink" and param == "bitrate":
                for bus in cfg.buses:
                    if bus.name == target:
                        bus.bitrate = parse_rate(value)
            return True
        for link in cfg.links:
            if link.name == target and param == "bandwidth":
                link.rate = parse_rate(value)
                return True
    return False


def apply_override_layers(cfg: NetworkConfig, cli_overrides: list[tuple[str, str]] | None = None) -> None:
    """Apply the inline-ini layer, then the command-line layer."""
    for key, value in cfg.ini:
        if not apply_override(cfg, key, value):
            cfg.extras[key] = value
            warning = f"unknown inline-ini key {key!r} (kept as extra)"
            if warning not in cfg.warnings:
                cfg.warnings.append(warning)
    for key, value in cli_overrides or []:
        if not apply_override(cfg, key, value):
            raise KeyError(f"unknown override key {key!r}")
