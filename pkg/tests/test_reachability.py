import random
from dataclasses import replace
from ipaddress import IPv4Address

import pytest
from hypothesis import given, settings, strategies as st

from archview.adl import parse_model
from archview.errors import UnknownEntityError, UnknownZoneError
from archview.reachability import (
    DEFAULT_DENY,
    Topology,
    apply_nat,
    compute_reachability,
    evaluate_ruleset,
    exposure_analysis,
    find_paths,
    reach_status,
)
from oracles import random_comm_model
from rule_table import CASES, dnat, flow, rule

SMALL = """
model "small"
layer asset {{
  device ha {{ zone: a; }}
  device hb {{ zone: b; }}
  device mid {{ zone: a; }}
  device island {{ zone: c; }}
  link l1 {{ endpoints: [ha, mid]; }}
  link l2 {{ endpoints: [mid, hb]; }}
}}
layer communication {{
  network na {{ range: 10.0.0.0/16; }}
  endpoint ep_a {{ device: ha; address: 10.0.1.1; services: [(tcp, 80)]; }}
  endpoint ep_b {{ device: hb; address: 10.0.2.1; services: [(tcp, 80)]; }}
  endpoint ep_c {{ device: island; address: 10.0.3.1; services: [(tcp, 80)]; }}
  {middle}
}}
"""


def small(middle):
    return parse_model(SMALL.format(middle=middle))


SWITCH = "enabler sw { device: mid; kind: switch; }"


def firewall(*rules):
    body = ", ".join(f"({r})" for r in rules)
    return f"inhibitor fw {{ device: mid; rules: [{body}]; }}"


class TestRuleset:
    @pytest.mark.parametrize("label, rules, nat, f, expected", CASES, ids=[c[0] for c in CASES])
    def test_table(self, label, rules, nat, f, expected):
        assert evaluate_ruleset([rule(r) for r in rules], apply_nat(nat, f)) == expected

    def test_default_deny_flag(self):
        v = evaluate_ruleset([], flow("1.1.1.1", "2.2.2.2", "tcp", 1))
        assert v == DEFAULT_DENY
        assert v.via_default and not v.allowed

    def test_fixture_corporate_rule(self, grid):
        f = flow("10.0.1.50", "10.0.2.20", "tcp", 80)
        v = evaluate_ruleset(grid.entities["fw_scada"].ruleset, f)
        assert v.allowed and v.matched_rule_index == 1


class TestNat:
    def test_empty_is_identity(self):
        f = flow("1.1.1.1", "2.2.2.2", "tcp", 1)
        assert apply_nat([], f) == f

    def test_dst_rewrite(self):
        f = apply_nat([dnat("203.0.113.10", "10.0.1.5")], flow("8.8.8.8", "203.0.113.10", "tcp", 1))
        assert f.dst == IPv4Address("10.0.1.5")

    def test_non_matching_unchanged(self):
        f = flow("8.8.8.8", "203.0.113.11", "tcp", 1)
        assert apply_nat([dnat("203.0.113.10", "10.0.1.5")], f) == f

    def test_src_rewrite(self):
        from archview.model import NatMapping

        m = NatMapping(IPv4Address("203.0.113.1"), IPv4Address("10.0.1.5"), "src_rewrite")
        assert apply_nat([m], flow("10.0.1.5", "8.8.8.8", "tcp", 1)).src == IPv4Address("203.0.113.1")


class TestPaths:
    def test_self_path(self):
        m = small(SWITCH)
        (p,) = find_paths(m, "ep_a", "ep_a", "tcp", 80)
        assert p.hops == () and p.admissible

    def test_switch_path(self):
        (p,) = find_paths(small(SWITCH), "ep_a", "ep_b", "tcp", 80)
        assert p.hops == ("ep_a", "sw", "ep_b")
        assert p.admissible and p.verdicts == ()

    def test_unknown_endpoint(self):
        with pytest.raises(UnknownEntityError):
            find_paths(small(SWITCH), "ep_a", "sw", "tcp", 80)

    def test_fixture_browser_to_plc_all_blocked(self, grid):
        paths = find_paths(grid, "browser_ep", "plc1_ep", "modbus", 502)
        assert paths
        assert all(p.first_block()[0] == "fw_scada" for p in paths)

    def test_paths_sorted_and_simple(self, grid):
        paths = find_paths(grid, "remote_ep", "scada_ep", "rdp", 3389)
        assert [p.hops for p in paths] == sorted(p.hops for p in paths)
        for p in paths:
            assert len(set(p.hops)) == len(p.hops)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000))
    def test_admissible_paths_revalidate(self, seed):
        m = random_comm_model(random.Random(seed), nat=False)
        topo = Topology(m)
        eps = topo.endpoints()
        for s in eps:
            for d in eps:
                if s == d:
                    continue
                src, dst = topo.comm[s].address, topo.comm[d].address
                for p in find_paths(m, s, d, "tcp", 80, topo):
                    assert len(set(p.hops)) == len(p.hops)
                    f = flow(str(src), str(dst), "tcp", 80) if src and dst else None
                    for hop, v in p.verdicts:
                        if f is not None:
                            assert evaluate_ruleset(topo.comm[hop].ruleset, f) == v
                    if p.admissible:
                        assert all(v.allowed for _, v in p.verdicts)


class TestMatrix:
    def test_no_link(self):
        m = compute_reachability(small(SWITCH), [("ep_a", "ep_c")])
        assert m.entries[("ep_a", "ep_c", "tcp", 80)].status == "no_path"

    def test_allow_all_inhibitor(self):
        m = compute_reachability(small(firewall("allow, any, any, any, any")), [("ep_a", "ep_b")])
        assert m.entries[("ep_a", "ep_b", "tcp", 80)].status == "reachable"

    def test_empty_ruleset_blocks_by_default(self):
        r = compute_reachability(small(firewall()), [("ep_a", "ep_b")]).entries[("ep_a", "ep_b", "tcp", 80)]
        assert (r.status, r.blocker, r.rule_index) == ("blocked", "fw", None)

    def test_protocol_mismatch(self):
        m = compute_reachability(small(SWITCH), [("ep_a", "ep_b", "udp", 53)])
        assert m.entries[("ep_a", "ep_b", "udp", 53)].status == "protocol_mismatch"

    def test_asymmetric_pair(self):
        m = small(firewall("allow, 10.0.1.1, any, tcp, 80"))
        ent = compute_reachability(m, [("ep_a", "ep_b"), ("ep_b", "ep_a")]).entries
        assert ent[("ep_a", "ep_b", "tcp", 80)].status == "reachable"
        assert ent[("ep_b", "ep_a", "tcp", 80)].status == "blocked"

    def test_fixture_flows(self, grid):
        topo = Topology(grid)
        assert reach_status(topo, "browser_ep", "historian_ep", "tcp", 80).status == "reachable"
        remote = reach_status(topo, "remote_ep", "scada_ep", "rdp", 3389)
        assert remote.status == "reachable"
        assert "comsrv_gw" in remote.path.hops
        plc = reach_status(topo, "browser_ep", "plc1_ep", "modbus", 502)
        assert (plc.status, plc.blocker, plc.rule_index) == ("blocked", "fw_scada", 0)

    def test_fixture_asymmetry(self, grid):
        topo = Topology(grid)
        assert reach_status(topo, "fe_ep", "plc1_ep", "modbus", 502).status == "reachable"
        back = reach_status(topo, "plc1_ep", "fe_ep", "modbus", 502)
        assert (back.status, back.blocker, back.rule_index) == ("blocked", "fw_field", None)

    def test_default_queries_cover_all_pairs(self, grid):
        topo = Topology(grid)
        eps = topo.endpoints()
        pairs = {(s, d) for s, d, _, _ in compute_reachability(grid, topology=topo).entries}
        assert pairs == {(s, d) for s in eps for d in eps if s != d}

    def test_text_and_dict_agree(self, grid):
        m = compute_reachability(grid, [("browser_ep", "historian_ep"), ("browser_ep", "plc1_ep")])
        rows = m.to_dict()
        assert len(rows) == len(m.to_text().splitlines())
        assert [r["status"] for r in rows] == ["reachable", "blocked"]


class TestExposure:
    def test_unknown_zone(self):
        with pytest.raises(UnknownZoneError):
            exposure_analysis(small(SWITCH), "internet")

    def test_fixture_internet(self, grid):
        assets = [e.asset for e in exposure_analysis(grid, "internet")]
        assert "comm_server" in assets
        assert assets == sorted(assets)

    def test_without_remote_access_rule(self, grid):
        fw = grid.entities["fw_wan"]
        grid.replace_entity(replace(fw, ruleset=fw.ruleset[1:]))
        assert "comm_server" not in {e.asset for e in exposure_analysis(grid, "internet")}

    def test_matches_matrix_oracle(self, grid):
        topo = Topology(grid)
        sources = [e for e in topo.endpoints() if grid.entities[topo.comm[e].device].zone == "internet"]
        matrix = compute_reachability(grid, [(s, d) for s in sources for d in topo.endpoints() if s != d], topo)
        expected = {topo.comm[d].device for (s, d, _, _) in matrix.reachable()} - {topo.comm[s].device for s in sources}
        assert {e.asset for e in exposure_analysis(grid, "internet", topo)} == expected
