"""Validation and compilation of ANDL sources into a NetworkConfig.

The compiler resolves type inheritance, materializes the topology graph,
computes shortest-hop message paths, derives gateway routing rules, pools,
switch forwarding tables and AVB reservations, and generates the TDMA
schedule for time-triggered streams.  Inline-ini pairs are applied last so
they override generated definitions.
"""

from __future__ import annotations

from collections import deque

from ..config import (
    BusCfg, DeviceCfg, ForwardCfg, LinkCfg, MessageCfg, NetworkConfig,
    PoolCfg, RuleCfg, ScheduleCfg, WindowCfg, apply_override_layers,
)
from ..ethernet import ETH_MAX_PAYLOAD, eth_frame_duration, eth_wire_bits, pad_payload
from ..gateway import COUNT_PREFIX, RECORD_HEADER
from ..kernel import SEC, US, parse_duration, parse_rate
from .nodes import (
    AndlFile, AvbBind, BeBind, CanBind, Diagnostic, MessageDecl, NetworkDecl,
    PoolBind, RcBind, TtBind, has_errors,
)
from .tdma import CycleTooLong, ScheduleInfeasible, TtFlow, generate_tdma_schedule

DEFAULT_ETH_RATE = 100_000_000
DEFAULT_CAN_BITRATE = 500_000
DEFAULT_HW_DELAY = 8 * US

NODE_KINDS = ("node", "gateway", "switch")


class CompileError(Exception):
    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("; ".join(str(d) for d in diagnostics if d.severity == "error"))
        self.diagnostics = diagnostics


def _binding_dict(binding) -> dict:
    if isinstance(binding, CanBind):
        return {"kind": "can", "id": binding.can_id}
    if isinstance(binding, TtBind):
        return {"kind": "tt", "ct": binding.ct_id}
    if isinstance(binding, AvbBind):
        return {"kind": "avb", "stream": binding.stream_id, "class": binding.cls}
    if isinstance(binding, RcBind):
        return {"kind": "rc", "vl": binding.vl_id, "bag": binding.bag}
    if isinstance(binding, BeBind):
        return {"kind": "be", "priority": binding.priority}
    raise TypeError(f"not a segment binding: {binding!r}")


class _Builder:
    def __init__(self, ast: AndlFile, network: str | None):
        self.ast = ast
        self.network_name = network
        self.diags: list[Diagnostic] = []
        self.cfg = NetworkConfig(name="")
        self.devices: dict[str, object] = {}
        self.links: list[LinkCfg] = []
        self.buses: dict[str, BusCfg] = {}
        self.adj: dict[str, list[tuple[str, tuple]]] = {}
        self.link_rate: dict[str, int] = {}  # directed link -> bits/s
        self._anon = 0
        self.pool_members: dict[tuple[str, str], list[dict]] = {}
        self.rules: dict[tuple, list[dict]] = {}
        self.forwarding: dict[tuple[str, tuple], list[str]] = {}
        self.slopes: dict[str, dict[str, int]] = {}
        self.tt_flows: dict[str, TtFlow] = {}

    def error(self, line: int, message: str) -> None:
        self.diags.append(Diagnostic("error", line, 1, message))

    def warn(self, line: int, message: str) -> None:
        self.diags.append(Diagnostic("warning", line, 1, message))

    # -- types and devices -------------------------------------------------

    def _type_index(self) -> dict[str, object]:
        index = {}
        for block in self.ast.types:
            for decl in block.decls:
                index[f"{block.name}.{decl.name}"] = decl
                index.setdefault(decl.name, decl)
        return index

    def _resolve(self, decl, types: dict) -> object:
        params: dict[str, str] = {}
        pools: list[str] = []
        chain = []
        cur = decl
        while cur is not None:
            chain.append(cur)
            if cur.extends is None:
                break
            nxt = types.get(cur.extends)
            if nxt is None:
                self.error(cur.line, f"unknown type {cur.extends!r} in extends")
                break
            if nxt.kind != decl.kind:
                self.error(cur.line, f"{decl.name} ({decl.kind}) cannot extend {cur.extends} ({nxt.kind})")
                break
            if nxt in chain:
                self.error(cur.line, f"inheritance cycle through {cur.extends}")
                break
            cur = nxt
        for member in reversed(chain):
            params.update(member.params)
            for p in member.pools:
                if p not in pools:
                    pools.append(p)
        decl.params = params
        decl.pools = pools
        return decl

    def _pick_network(self) -> NetworkDecl | None:
        if not self.ast.networks:
            self.error(1, "no network declared")
            return None
        if self.network_name is None:
            return self.ast.networks[0]
        for net in self.ast.networks:
            if net.name == self.network_name:
                return net
        self.error(1, f"network {self.network_name!r} not found")
        return None

    # -- topology ------------------------------------------------------------

    def _build_topology(self, net: NetworkDecl) -> None:
        types = self._type_index()
        for dev in net.devices:
            self._resolve(dev, types)
            if dev.name in self.devices:
                self.error(dev.line, f"duplicate device name {dev.name!r}")
                continue
            self.devices[dev.name] = dev
            self.cfg.devices.append(DeviceCfg(dev.name, dev.kind, dict(dev.params)))

        def add_edge(a: str, b: str, info: tuple) -> None:
            self.adj.setdefault(a, []).append((b, info))
            self.adj.setdefault(b, []).append((a, info))

        for seg in net.segments:
            kinds = set()
            for conn in seg.conns:
                missing = [n for n in (conn.a, conn.b) if n not in self.devices]
                if missing:
                    self.error(conn.line, f"unknown device {missing[0]!r} in connection")
                    continue
                a, b = self.devices[conn.a], self.devices[conn.b]
                if a.kind == "canLink" or b.kind == "canLink":
                    if a.kind == "canLink" and b.kind == "canLink":
                        self.error(conn.line, "cannot connect two CAN links")
                        continue
                    bus_decl, other = (a, conn.b) if a.kind == "canLink" else (b, conn.a)
                    if self.devices[other].kind not in ("node", "gateway"):
                        self.error(conn.line, f"{other!r} cannot attach to a CAN bus")
                        continue
                    if conn.link or conn.new_type:
                        self.error(conn.line, "CAN attachments take no link reference")
                        continue
                    bus = self.buses.get(bus_decl.name)
                    if bus is None:
                        try:
                            bitrate = parse_rate(bus_decl.params.get("bitrate", "500kb/s"))
                        except ValueError as exc:
                            self.error(conn.line, str(exc))
                            bitrate = DEFAULT_CAN_BITRATE
                        bus = BusCfg(bus_decl.name, bitrate, seg.name)
                        self.buses[bus_decl.name] = bus
                    elif bus.segment != seg.name:
                        self.error(conn.line, f"bus {bus.name!r} appears in two segments")
                    if other in bus.attached:
                        self.warn(conn.line, f"{other!r} attached to {bus.name!r} twice")
                    else:
                        bus.attached.append(other)
                        add_edge(other, bus.name, ("can", bus.name, seg.name))
                    kinds.add("can")
                    continue
                if a.kind not in NODE_KINDS or b.kind not in NODE_KINDS:
                    self.error(conn.line, "Ethernet links connect nodes, switches, or gateways")
                    continue
                rate = DEFAULT_ETH_RATE
                if conn.link:
                    link_dev = self.devices.get(conn.link)
                    if link_dev is None or link_dev.kind != "ethernetLink":
                        self.error(conn.line, f"{conn.link!r} is not an ethernetLink")
                        continue
                    name = conn.link
                    raw = link_dev.params.get("bandwidth")
                elif conn.new_type:
                    link_type = types.get(conn.new_type)
                    if link_type is None or link_type.kind != "ethernetLink":
                        self.error(conn.line, f"{conn.new_type!r} is not an ethernetLink type")
                        continue
                    self._anon += 1
                    name = f"link{self._anon}"
                    raw = link_type.params.get("bandwidth")
                else:
                    self._anon += 1
                    name = f"link{self._anon}"
                    raw = None
                if raw is not None:
                    try:
                        rate = parse_rate(raw)
                    except ValueError as exc:
                        self.error(conn.line, str(exc))
                if any(l.name == name for l in self.links):
                    self.error(conn.line, f"link {name!r} used in more than one connection")
                    continue
                link = LinkCfg(name, conn.a, conn.b, rate, seg.name)
                self.links.append(link)
                self.link_rate[f"{conn.a}->{conn.b}"] = rate
                self.link_rate[f"{conn.b}->{conn.a}"] = rate
                add_edge(conn.a, conn.b, ("eth", name, seg.name))
                kinds.add("ethernet")
            if kinds:
                if len(kinds) > 1:
                    self.error(seg.line, f"segment {seg.name!r} mixes CAN and Ethernet")
                self.cfg.segments[seg.name] = sorted(kinds)[0]

        eth_degree: dict[str, int] = {}
        for link in self.links:
            for end in (link.a, link.b):
                eth_degree[end] = eth_degree.get(end, 0) + 1
        for name, count in eth_degree.items():
            if count <= 1:
                continue
            kind = self.devices[name].kind
            if kind == "gateway":
                self.error(0, f"gateway {name} has {count} Ethernet links; one uplink is supported")
            elif kind == "node":
                self.warn(0, f"node {name} has {count} Ethernet links; the first is its interface")

    def _edge(self, u: str, v: str) -> tuple | None:
        for nbr, info in self.adj.get(u, ()):
            if nbr == v:
                return info
        return None

    def _shortest_path(self, src: str, dst: str) -> list[str] | None:
        if src == dst or src not in self.adj:
            return None
        seen = {src: None}
        queue = deque([src])
        while queue:
            u = queue.popleft()
            for v, _ in self.adj[u]:
                if v not in seen:
                    seen[v] = u
                    if v == dst:
                        path = [dst]
                        while seen[path[-1]] is not None:
                            path.append(seen[path[-1]])
                        return path[::-1]
                    queue.append(v)
        return None

    # -- messages -------------------------------------------------------------

    def _segment_of(self, u: str, v: str) -> str:
        info = self._edge(u, v)
        return info[2] if info else ""

    def _eth_runs(self, path: list[str]) -> list[list[str]]:
        """Maximal sub-paths whose edges are Ethernet; switches interior only."""
        runs = []
        i = 0
        while i < len(path) - 1:
            info = self._edge(path[i], path[i + 1])
            if info and info[0] == "eth":
                j = i + 1
                while (
                    j < len(path) - 1
                    and self.devices[path[j]].kind == "switch"
                    and (e := self._edge(path[j], path[j + 1])) is not None
                    and e[0] == "eth"
                ):
                    j += 1
                runs.append(path[i : j + 1])
                i = j
            else:
                i += 1
        return runs

    def _add_rule(self, gateway: str, segment: str, *, can_id=None, key=None) -> list[dict]:
        k = (gateway, segment, can_id, tuple(key) if key else None)
        return self.rules.setdefault(k, [])

    def _merge_eth_dest(self, dests: list[dict], kind: str, tag: dict, dst: str, pool: str | None) -> None:
        for d in dests:
            if d["kind"] == kind and d.get("pool") == pool and d["tag"] == tag:
                if dst not in d["dst"]:
                    d["dst"].append(dst)
                return
        entry = {"kind": kind, "tag": tag, "dst": [dst]}
        if pool:
            entry["pool"] = pool
        dests.append(entry)

    def _merge_can_dest(self, dests: list[dict], bus: str, can_id: int) -> None:
        for d in dests:
            if d["kind"] == "can" and d["bus"] == bus and d["can_id"] == can_id:
                return
        dests.append({"kind": "can", "bus": bus, "can_id": can_id})

    def _build_messages(self, net: NetworkDecl) -> None:
        claimed_can: dict[tuple[str, int], str] = {}
        claimed_stream: dict[tuple[str, int], str] = {}
        for msg in net.messages:
            m = self._build_message(net, msg, claimed_can, claimed_stream)
            if m is not None:
                self.cfg.messages.append(m)

    def _build_message(self, net, msg: MessageDecl, claimed_can, claimed_stream) -> MessageCfg | None:
        line = msg.line
        for name in [msg.sender, *msg.receivers]:
            dev = self.devices.get(name)
            if dev is None:
                self.error(line, f"message {msg.name}: unknown device {name!r}")
                return None
            if dev.kind != "node":
                self.error(line, f"message {msg.name}: {name!r} is not a node")
                return None
        if msg.period <= 0:
            self.error(line, f"message {msg.name}: period must be positive")
            return None
        if not msg.receivers:
            self.error(line, f"message {msg.name}: needs at least one receiver")
            return None

        bindings: dict[str, dict] = {}
        pool_binds: dict[str, PoolBind] = {}
        bare: list[str] = []
        for entry in msg.entries:
            target = entry.target
            if isinstance(entry.binding, PoolBind) or entry.binding is None:
                dev = self.devices.get(target)
                if dev is None or dev.kind != "gateway":
                    self.error(entry.line, f"message {msg.name}: {target!r} is not a gateway")
                    continue
                if isinstance(entry.binding, PoolBind):
                    if entry.binding.pool not in dev.pools:
                        self.error(entry.line, f"gateway {target} declares no pool {entry.binding.pool!r}")
                        continue
                    pool_binds[target] = entry.binding
                else:
                    bare.append(target)
            else:
                if target not in self.cfg.segments:
                    self.error(entry.line, f"message {msg.name}: unknown segment {target!r}")
                    continue
                b = _binding_dict(entry.binding)
                seg_kind = self.cfg.segments[target]
                if seg_kind == "can" and b["kind"] != "can":
                    self.error(entry.line, f"segment {target} is CAN; use a can binding")
                    continue
                if seg_kind == "ethernet" and b["kind"] == "can":
                    self.error(entry.line, f"segment {target} is Ethernet; can binding not allowed")
                    continue
                bindings[target] = b

        paths: dict[str, list[str]] = {}
        gateways: list[str] = []
        needed_segments: list[str] = []
        for receiver in msg.receivers:
            path = self._shortest_path(msg.sender, receiver)
            if path is None:
                self.error(line, f"message {msg.name}: receiver {receiver!r} is unreachable")
                return None
            paths[receiver] = path
            for u, v in zip(path, path[1:]):
                seg = self._segment_of(u, v)
                if seg not in needed_segments:
                    needed_segments.append(seg)
            for vertex in path[1:-1]:
                if self.devices[vertex].kind == "gateway" and vertex not in gateways:
                    gateways.append(vertex)

        for seg in needed_segments:
            if seg not in bindings:
                self.error(line, f"message {msg.name}: path crosses segment {seg!r} without a mapping")
                return None
        for gw in gateways:
            if gw not in pool_binds and gw not in bare:
                self.error(line, f"message {msg.name}: gateway {gw} on path but not listed in mapping")
                return None
        for gw in [*pool_binds, *bare]:
            if gw not in gateways:
                self.error(line, f"message {msg.name}: gateway {gw} listed but not on the message path")
                return None

        # payload limits per binding
        for seg, b in bindings.items():
            if b["kind"] == "can" and msg.payload > 8:
                self.error(line, f"message {msg.name}: CAN payload exceeds 8 bytes")
                return None
            if b["kind"] != "can" and msg.payload > ETH_MAX_PAYLOAD:
                self.error(line, f"message {msg.name}: payload exceeds 1500 bytes")
                return None
            if b["kind"] == "rc" and b["bag"] <= 0:
                self.error(line, f"message {msg.name}: bag must be positive")
                return None

        # id claims
        for receiver, path in paths.items():
            for u, v in zip(path, path[1:]):
                info = self._edge(u, v)
                if info and info[0] == "can":
                    seg_binding = bindings.get(info[2])
                    if seg_binding:
                        claim = (info[1], seg_binding["id"])
                        owner = claimed_can.setdefault(claim, msg.name)
                        if owner != msg.name:
                            self.error(line, f"duplicate CAN id {claim[1]} on bus {claim[0]} ({owner} vs {msg.name})")
                            return None
        for seg, b in bindings.items():
            if b["kind"] in ("tt", "avb", "rc"):
                sid = b.get("ct") or b.get("stream") or b.get("vl")
                claim = (b["kind"], sid)
                owner = claimed_stream.setdefault(claim, msg.name)
                if owner != msg.name:
                    self.error(line, f"duplicate {b['kind']} id {sid} ({owner} vs {msg.name})")
                    return None

        if msg.multicast:
            for b in bindings.values():
                if b["kind"] == "tt":
                    self.error(line, f"message {msg.name}: multicast TT streams are not supported; use per-receiver duplication")
                    return None

        cfg_msg = MessageCfg(
            name=msg.name, sender=msg.sender, receivers=list(msg.receivers),
            payload=msg.payload, period=msg.period, offset=msg.offset,
            bindings=bindings, gateways=gateways,
            pools={gw: {"pool": pb.pool, "holdUp": pb.holdup} for gw, pb in pool_binds.items()},
            paths=paths,
        )
        self._derive_tables(cfg_msg, msg.multicast)
        return cfg_msg

    # -- derived tables ----------------------------------------------------------

    def _derive_tables(self, msg: MessageCfg, multicast: bool) -> None:
        line = 0
        for receiver in msg.receivers:
            path = msg.paths[receiver]
            for i, vertex in enumerate(path[1:-1], start=1):
                if self.devices[vertex].kind != "gateway":
                    continue
                gw = vertex
                seg_in = self._segment_of(path[i - 1], path[i])
                seg_out = self._segment_of(path[i], path[i + 1])
                in_info = self._edge(path[i - 1], path[i])
                out_info = self._edge(path[i], path[i + 1])
                # Next stop on the Ethernet side: the following gateway, else the receiver.
                next_stop = receiver
                for w in path[i + 1 :]:
                    if self.devices[w].kind == "gateway":
                        next_stop = w
                        break
                if in_info[0] == "can":
                    can_id = msg.bindings[seg_in]["id"]
                    dests = self._add_rule(gw, seg_in, can_id=can_id)
                    if out_info[0] == "eth":
                        tag = msg.bindings[seg_out]
                        pool = msg.pools.get(gw, {}).get("pool")
                        if pool is not None:
                            self._merge_eth_dest(dests, "pool", tag, next_stop, pool)
                            members = self.pool_members.setdefault((gw, pool), [])
                            members.append({
                                "message": msg.name, "can_id": can_id,
                                "payload": msg.payload, "period": msg.period,
                                "holdup": msg.pools[gw]["holdUp"], "tag": tag,
                            })
                        else:
                            self._merge_eth_dest(dests, "eth", tag, next_stop, None)
                    else:
                        if gw in msg.pools:
                            self.error(line, f"message {msg.name}: pool at {gw} needs an Ethernet egress")
                        self._merge_can_dest(dests, out_info[1], msg.bindings[seg_out]["id"])
                else:
                    # Ethernet ingress at the gateway
                    if out_info[0] == "can":
                        out_id = msg.bindings[seg_out]["id"]
                        if any(self._edge(u, v)[0] == "can" for u, v in zip(path[: i], path[1 : i + 1])):
                            # records tunneled from an upstream CAN segment
                            origin_seg = next(
                                self._segment_of(u, v)
                                for u, v in zip(path[: i], path[1 : i + 1])
                                if self._edge(u, v)[0] == "can"
                            )
                            origin_id = msg.bindings[origin_seg]["id"]
                            dests = self._add_rule(gw, seg_in, can_id=origin_id)
                        else:
                            tag = msg.bindings[seg_in]
                            key = self._forward_key(tag, msg, multicast, frame_dst=gw)
                            dests = self._add_rule(gw, seg_in, key=list(key))
                        self._merge_can_dest(dests, out_info[1], out_id)
                        if gw in msg.pools:
                            self.error(line, f"message {msg.name}: pool at {gw} needs an Ethernet egress")
                    else:
                        tag = msg.bindings[seg_out]
                        key = self._forward_key(msg.bindings[seg_in], msg, multicast, frame_dst=gw)
                        dests = self._add_rule(gw, seg_in, key=list(key))
                        self._merge_eth_dest(dests, "eth", tag, next_stop, None)

            # switch forwarding along Ethernet runs
            for run in self._eth_runs(path):
                end = run[-1]
                seg = self._segment_of(run[0], run[1])
                tag = msg.bindings[seg]
                key = self._forward_key(tag, msg, multicast, frame_dst=end)
                for j in range(1, len(run) - 1):
                    sw = run[j]
                    if self.devices[sw].kind != "switch":
                        continue
                    ports = self.forwarding.setdefault((sw, key), [])
                    if run[j + 1] not in ports:
                        ports.append(run[j + 1])

        # AVB reservations
        self._reserve_avb(msg, multicast)
        # TT flows for the schedule generator
        self._collect_tt_flows(msg, multicast)

    def _forward_key(self, tag: dict, msg: MessageCfg, multicast: bool, frame_dst: str) -> tuple:
        kind = tag["kind"]
        if kind == "rc":
            return ("rc", tag["vl"])
        if kind == "tt" and (multicast or len(msg.receivers) == 1):
            return ("tt", tag["ct"])
        if kind == "avb" and (multicast or len(msg.receivers) == 1):
            return ("avb", tag["stream"])
        return ("dst", frame_dst)

    def _run_frame_payload(self, msg: MessageCfg, run_start: str) -> int:
        """Wire payload of this message's frames on an Ethernet run."""
        if self.devices[run_start].kind == "gateway":
            pool = msg.pools.get(run_start)
            if pool is not None:
                members = self.pool_members.get((run_start, pool["pool"]), [])
                return _pool_worst_payload(members)
            # unpooled single-record aggregate
            return pad_payload(COUNT_PREFIX + RECORD_HEADER + msg.payload)
        return pad_payload(msg.payload)

    def _run_period(self, msg: MessageCfg, run_start: str) -> int:
        if self.devices[run_start].kind == "gateway":
            pool = msg.pools.get(run_start)
            if pool is not None:
                members = self.pool_members.get((run_start, pool["pool"]), [])
                return min(m["period"] for m in members)
        return msg.period

    def _reserve_avb(self, msg: MessageCfg, multicast: bool) -> None:
        seen_links: set[str] = set()
        for receiver in msg.receivers:
            path = msg.paths[receiver]
            for run in self._eth_runs(path):
                seg = self._segment_of(run[0], run[1])
                tag = msg.bindings[seg]
                if tag["kind"] != "avb":
                    continue
                payload = self._run_frame_payload(msg, run[0])
                period = self._run_period(msg, run[0])
                bits_per_s = (eth_wire_bits(payload) * SEC + period - 1) // period
                for u, v in zip(run, run[1:]):
                    link = f"{u}->{v}"
                    if multicast and link in seen_links:
                        continue
                    seen_links.add(link)
                    slot = self.slopes.setdefault(link, {"A": 0, "B": 0})
                    slot[tag["class"]] += bits_per_s

    def _collect_tt_flows(self, msg: MessageCfg, multicast: bool) -> None:
        for receiver in msg.receivers:
            path = msg.paths[receiver]
            for run in self._eth_runs(path):
                seg = self._segment_of(run[0], run[1])
                tag = msg.bindings[seg]
                if tag["kind"] != "tt":
                    continue
                payload = self._run_frame_payload(msg, run[0])
                period = self._run_period(msg, run[0])
                hops = []
                gaps = []
                for idx, (u, v) in enumerate(zip(run, run[1:])):
                    link = f"{u}->{v}"
                    dur = eth_frame_duration(payload, self.link_rate[link])
                    hops.append((link, dur))
                    if idx < len(run) - 2:
                        sw = run[idx + 1]
                        raw = self.devices[sw].params.get("hardwareDelay")
                        gaps.append(parse_duration(raw) if raw else DEFAULT_HW_DELAY)
                if self.devices[run[0]].kind == "gateway":
                    pool = msg.pools.get(run[0], {}).get("pool")
                    if pool:
                        flow_id = f"pool:{run[0]}:{pool}:{run[-1]}"
                    else:
                        flow_id = f"gw:{run[0]}:{msg.name}:{run[-1]}"
                    scheduled = False
                else:
                    flow_id = f"{msg.name}:{receiver}"
                    scheduled = True
                if flow_id not in self.tt_flows:
                    self.tt_flows[flow_id] = TtFlow(
                        flow_id, tag["ct"], period, tuple(hops), tuple(gaps), scheduled
                    )

    # -- pools --------------------------------------------------------------------

    def _build_pools(self) -> None:
        for (gw, pool), members in sorted(self.pool_members.items()):
            holdups: dict[int, int] = {}
            tags = []
            for m in members:
                if m["can_id"] in holdups and holdups[m["can_id"]] != m["holdup"]:
                    self.error(0, f"pool {gw}.{pool}: conflicting hold-ups for id {m['can_id']}")
                holdups[m["can_id"]] = m["holdup"]
                if m["tag"] not in tags:
                    tags.append(m["tag"])
                if m["holdup"] > m["period"]:
                    self.warn(0, f"pool {gw}.{pool}: hold-up of id {m['can_id']} exceeds its period; "
                                 "aggregates may carry several instances of one id")
            if len(tags) > 1:
                self.error(0, f"pool {gw}.{pool}: members map to different backbone classes")
            self.cfg.pools.append(PoolCfg(gw, pool, holdups))

    # -- assembly -------------------------------------------------------------------

    def build(self) -> tuple[NetworkConfig, list[Diagnostic]]:
        net = self._pick_network()
        if net is None:
            return self.cfg, self.diags
        self.cfg.name = net.name
        self._build_topology(net)
        if has_errors(self.diags):
            return self.cfg, self.diags
        self._build_messages(net)
        self._build_pools()

        self.cfg.links = self.links
        self.cfg.buses = list(self.buses.values())
        for (gw, seg, can_id, key), dests in self.rules.items():
            self.cfg.rules.append(
                RuleCfg(gw, seg, can_id=can_id, key=list(key) if key else None, dests=dests)
            )
        for (sw, key), ports in self.forwarding.items():
            self.cfg.forwarding.append(ForwardCfg(sw, list(key), ports))
        self.cfg.slopes = {
            link: {cls: v for cls, v in slot.items() if v}
            for link, slot in self.slopes.items()
            if any(slot.values())
        }

        flows = list(self.tt_flows.values())
        if flows:
            try:
                schedule, releases = generate_tdma_schedule(flows)
                self.cfg.schedule = ScheduleCfg(
                    schedule.cycle_length,
                    [WindowCfg(w.ct_id, w.link, w.offset, w.duration) for w in schedule.windows],
                    {fid: offs for fid, offs in releases.items() if self.tt_flows[fid].scheduled_release},
                )
            except (ScheduleInfeasible, CycleTooLong) as exc:
                self.error(0, f"TDMA schedule: {exc}")

        for block in net.inline_ini:
            for raw in block.splitlines():
                stripped = raw.strip()
                if not stripped or stripped.startswith("#") or stripped.startswith("//"):
                    continue
                if "=" not in stripped:
                    self.warn(0, f"inline ini line without '=': {stripped!r}")
                    continue
                key, _, value = stripped.partition("=")
                self.cfg.ini.append([key.strip(), value.strip()])
        apply_override_layers(self.cfg)

        # reservation cap, checked after overrides may have raised slopes
        for link, slot in self.cfg.slopes.items():
            rate = self.link_rate.get(link)
            if rate is None:
                continue
            total = slot.get("A", 0) + slot.get("B", 0)
            if 4 * total > 3 * rate:
                self.error(0, f"AVB reservation on {link} is {total} b/s, above 75% of {rate} b/s")

        self.cfg.warnings.extend(str(d) for d in self.diags if d.severity == "warning")
        return self.cfg, self.diags


def _pool_worst_payload(members: list[dict]) -> int:
    total = COUNT_PREFIX
    for m in members:
        per_flush = m["holdup"] // m["period"] + 1
        total += (RECORD_HEADER + m["payload"]) * per_flush
    return min(ETH_MAX_PAYLOAD, pad_payload(total))


def validate(ast: AndlFile, network: str | None = None) -> list[Diagnostic]:
    """Semantic checks; diagnostics are the result, nothing is raised."""
    _, diags = _Builder(ast, network).build()
    return diags


def compile_network(ast: AndlFile, network: str | None = None) -> NetworkConfig:
    """Compile a parsed description; raises CompileError on any error."""
    cfg, diags = _Builder(ast, network).build()
    if has_errors(diags):
        raise CompileError(diags)
    return cfg
