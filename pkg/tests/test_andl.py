import pytest
from hypothesis import given, settings, strategies as st

from autonetsim.andl import (
    CompileError, compile_network, has_errors, parse, print_file, validate,
)
from autonetsim.kernel import MS, US


def test_parse_small_network(listing_small):
    ast, diags = parse(listing_small)
    assert not has_errors(diags)
    assert len(ast.networks) == 1
    net = ast.networks[0]
    names = [d.name for d in net.devices]
    assert names == ["eth1", "cb1", "cb2", "cn1", "cn2", "en1", "en2", "gw1", "gw2", "s1"]
    assert [s.name for s in net.segments] == ["backbone", "canbus"]
    assert [m.name for m in net.messages] == ["msg1", "msg2"]
    assert net.inline_ini == ["record-eventlog = false"]
    msg1 = net.messages[0]
    assert msg1.payload == 6 and msg1.period == 1 * MS
    assert msg1.entries[1].binding.pool == "gw1_1"
    assert msg1.entries[1].binding.holdup == 2 * MS
    assert msg1.entries[2].binding is None  # bare gateway entry


def test_parse_empty_network():
    ast, diags = parse("network n { devices { } connections { } communication { } }")
    assert not has_errors(diags)
    assert ast.networks[0].name == "n"


def test_parse_missing_semicolon_has_position():
    ast, diags = parse("network n { devices { node x } connections { } }")
    errors = [d for d in diags if d.severity == "error"]
    assert errors and errors[0].line == 1 and errors[0].col > 1


def test_parse_collects_multiple_errors():
    text = """
network n {
  devices {
    node x
    node ok;
    switch ;
  }
}
"""
    _, diags = parse(text)
    assert sum(1 for d in diags if d.severity == "error") >= 2


def test_validate_small_network_clean(listing_small):
    ast, diags = parse(listing_small)
    all_diags = diags + validate(ast)
    assert not has_errors(all_diags)


def test_validate_can_payload_limit(listing_small):
    ast, _ = parse(listing_small.replace("payload 6B;", "payload 9B;"))
    diags = validate(ast)
    assert any("exceeds 8 bytes" in d.message for d in diags)


def test_validate_duplicate_can_id(listing_small):
    extra = """
    message msg3 {
      sender cn1;
      receivers cn2;
      payload 2B;
      period 5ms;
      mapping {
        canbus: can{id 37;};
        gw1: pool gw1_1{holdUp 2ms;};
        gw2;
        backbone: tt{ctID 103;};
      }
    }
  }
}
"""
    text = listing_small.rstrip()
    text = text[: text.rindex("}")]
    text = text[: text.rindex("}")] + extra
    ast, diags = parse(text)
    assert not has_errors(diags)
    vdiags = validate(ast)
    assert any("duplicate CAN id 37" in d.message for d in vdiags)


def test_validate_unknown_device_and_unreachable():
    text = """
network n {
  devices { node a; node b; node c; switch s; }
  connections { segment eth { a <--> s; b <--> s; } }
  communication {
    message m1 { sender a; receivers nobody; payload 4B; period 1ms;
      mapping { eth: be{priority 0;}; } }
    message m2 { sender a; receivers c; payload 4B; period 1ms;
      mapping { eth: be{priority 0;}; } }
  }
}
"""
    ast, diags = parse(text)
    assert not has_errors(diags)
    vdiags = validate(ast)
    assert any("unknown device 'nobody'" in d.message for d in vdiags)
    assert any("unreachable" in d.message for d in vdiags)


def test_validate_gateway_mismatch(listing_small):
    # dropping the bare gw2 entry leaves a path gateway unlisted
    ast, _ = parse(listing_small.replace("gw2;           //gw2 also responsible for the msg path", ""))
    vdiags = validate(ast)
    assert any("gateway gw2 on path but not listed" in d.message for d in vdiags)


def test_validate_avb_overreservation():
    text = """
network n {
  devices { node a; node b; switch s; }
  connections { segment eth { a <--> s; b <--> s; } }
  communication {
    message m { sender a; receivers b; payload 1500B; period 150us;
      mapping { eth: avb{id 1;}; } }
  }
}
"""
    # 1538 B wire every 150 us is ~82 Mb/s, above the 75% cap on 100 Mb/s
    ast, _ = parse(text)
    vdiags = validate(ast)
    assert any("above 75%" in d.message for d in vdiags)


def test_validate_missing_segment_mapping(listing_small):
    ast, _ = parse(listing_small.replace("backbone: tt{ctID 102;}; //TT traffic on backbone", ""))
    vdiags = validate(ast)
    assert any("without a mapping" in d.message for d in vdiags)


def test_compile_small_network(listing_small):
    ast, _ = parse(listing_small)
    cfg = compile_network(ast)
    assert cfg.name == "smallNetwork"
    assert {b.name for b in cfg.buses} == {"cb1", "cb2"}
    assert cfg.segments == {"backbone": "ethernet", "canbus": "can"}
    # routing: id 37 from the CAN side of gw1 goes to gw2 as TT ct 102 via the pool
    rule = next(r for r in cfg.rules if r.gateway == "gw1" and r.can_id == 37)
    (dest,) = rule.dests
    assert dest["kind"] == "pool" and dest["pool"] == "gw1_1"
    assert dest["tag"] == {"kind": "tt", "ct": 102}
    assert dest["dst"] == ["gw2"]
    # the pool carries the 2 ms hold-up for id 37
    pool = next(p for p in cfg.pools if p.gateway == "gw1")
    assert pool.holdup_by_id == {37: 2 * MS}
    # gw2 unpacks id 37 back onto cb2
    back = next(r for r in cfg.rules if r.gateway == "gw2" and r.can_id == 37)
    assert back.dests == [{"kind": "can", "bus": "cb2", "can_id": 37}]
    # switch forwards ct 102 toward gw2 and the AVB stream toward en2
    keys = {tuple(f.key): f.ports for f in cfg.forwarding}
    assert keys[("tt", 102)] == ["gw2"]
    assert keys[("avb", 1)] == ["en2"]
    # schedule exists with windows on both backbone hops of the aggregate
    links = {w.link for w in cfg.schedule.windows}
    assert links == {"gw1->s1", "s1->gw2"}
    # inline ini was unknown -> kept as extra with a warning
    assert cfg.extras.get("record-eventlog") == "false"
    assert any("record-eventlog" in w for w in cfg.warnings)


def test_compile_is_deterministic(listing_small):
    ast1, _ = parse(listing_small)
    ast2, _ = parse(listing_small)
    assert compile_network(ast1).to_json() == compile_network(ast2).to_json()


def test_compile_error_raises(listing_small):
    ast, _ = parse(listing_small.replace("payload 6B;", "payload 9B;"))
    with pytest.raises(CompileError):
        compile_network(ast)


def test_compile_backbone_extension(listing_backbone):
    ast, diags = parse(listing_backbone)
    assert not has_errors(diags)
    cfg = compile_network(ast)
    switches = [d.name for d in cfg.devices if d.kind == "switch"]
    assert switches == ["switch0", "switch1", "switch2"]
    # every declared node can be reached from every other (single component)
    adj = {}
    for link in cfg.links:
        adj.setdefault(link.a, set()).add(link.b)
        adj.setdefault(link.b, set()).add(link.a)
    for bus in cfg.buses:
        for n in bus.attached:
            adj.setdefault(n, set()).add(bus.name)
            adj.setdefault(bus.name, set()).add(n)
    nodes = {d.name for d in cfg.devices if d.kind != "ethernetLink"}
    seen = set()
    stack = [next(iter(nodes))]
    while stack:
        v = stack.pop()
        if v in seen:
            continue
        seen.add(v)
        stack.extend(adj.get(v, ()))
    assert nodes <= seen
    # the lidar stream is one multicast virtual link across both receivers
    fwd = {tuple(f.key): (f.switch, f.ports) for f in cfg.forwarding}
    assert fwd[("rc", 11)][0] in ("switch0", "switch1", "switch2")
    rc_entries = [f for f in cfg.forwarding if tuple(f.key) == ("rc", 11)]
    by_switch = {f.switch: f.ports for f in rc_entries}
    assert by_switch["switch2"] == ["log", "fusi"]


def test_validate_gateway_with_two_ethernet_links():
    text = """
network g2 {
  devices { node a; node b; gateway gw; switch s1; switch s2; }
  connections { segment eth {
    a <--> s1; s1 <--> gw; gw <--> s2; s2 <--> b;
  } }
  communication {
    message m { sender a; receivers b; payload 10B; period 1ms;
      mapping { eth: be{priority 0;}; gw; } }
  }
}
"""
    ast, _ = parse(text)
    vdiags = validate(ast)
    assert any("one uplink is supported" in d.message for d in vdiags)


def test_config_json_roundtrip(listing_small):
    from autonetsim.config import NetworkConfig

    ast, _ = parse(listing_small)
    cfg = compile_network(ast)
    again = NetworkConfig.from_json(cfg.to_json())
    assert again.to_json() == cfg.to_json()


def test_print_parse_roundtrip(listing_small, listing_backbone):
    for text in (listing_small, listing_backbone):
        ast, diags = parse(text)
        assert not has_errors(diags)
        printed = print_file(ast)
        ast2, diags2 = parse(printed)
        assert not has_errors(diags2)
        assert ast2 == ast


_ident = st.from_regex(r"[a-z][a-z0-9]{0,6}", fullmatch=True)


@settings(deadline=None, max_examples=40)
@given(
    names=st.lists(_ident, min_size=2, max_size=5, unique=True),
    payload=st.integers(min_value=1, max_value=1500),
    period_us=st.integers(min_value=1, max_value=10_000),
    prio=st.integers(min_value=0, max_value=7),
)
def test_print_parse_roundtrip_generated(names, payload, period_us, prio):
    sender, receiver = names[0], names[1]
    devs = "".join(f"    node {n};\n" for n in names)
    conns = "".join(f"      {n} <--> sw;\n" for n in names)
    text = f"""
network g {{
  devices {{
{devs}    switch sw;
  }}
  connections {{
    segment eth {{
{conns}    }}
  }}
  communication {{
    message m {{
      sender {sender};
      receivers {receiver};
      payload {payload}B;
      period {period_us}us;
      mapping {{ eth: be{{priority {prio};}}; }}
    }}
  }}
}}
"""
    ast, diags = parse(text)
    assert not has_errors(diags)
    ast2, diags2 = parse(print_file(ast))
    assert not has_errors(diags2)
    assert ast2 == ast
