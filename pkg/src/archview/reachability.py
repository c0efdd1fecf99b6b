"""How data can move through the communication layer.

Rule semantics are first-match with an implicit default deny.  A path is a
simple sequence of communication entities from a source endpoint to a
destination endpoint; every intermediate hop is an enabler or inhibitor.
Two entities are adjacent when they sit on the same device or on devices
joined by an asset-layer link.  Where a hop declares routes, the next hop
must be the longest-prefix route's next hop (or the destination endpoint
itself when directly attached).  At an inhibitor the order is destination
NAT, ruleset, source NAT.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, replace
from ipaddress import IPv4Address
from typing import Iterable, Optional, Sequence

from . import kernels
from .errors import UnknownEntityError, UnknownZoneError
from .model import ArchModel, AssetEntity, CommEntity, FirewallRule, NatMapping, ServiceEntity, effective_zone

FORWARDING_KINDS = ("enabler", "inhibitor")
NO_PROTOCOL = "none"


@dataclass(frozen=True)
class FlowTuple:
    src: Optional[IPv4Address]
    dst: Optional[IPv4Address]
    proto: str
    port: int


@dataclass(frozen=True)
class Verdict:
    decision: str
    matched_rule_index: Optional[int] = None

    @property
    def via_default(self) -> bool:
        return self.matched_rule_index is None

    @property
    def allowed(self) -> bool:
        return self.decision == "allow"


DEFAULT_DENY = Verdict("deny")


def match_rule(rule: FirewallRule, flow: FlowTuple) -> bool:
    if rule.src is not None and (flow.src is None or flow.src not in rule.src):
        return False
    if rule.dst is not None and (flow.dst is None or flow.dst not in rule.dst):
        return False
    if rule.proto is not None and rule.proto != flow.proto:
        return False
    if rule.port is not None and not rule.port[0] <= flow.port <= rule.port[1]:
        return False
    return True


# protocol tokens are interned to ints for the kernels
_PROTO_IDS: dict[str, int] = {}


def _proto_id(token: str) -> int:
    return _PROTO_IDS.setdefault(token, len(_PROTO_IDS))


def _encode_rule(rule: FirewallRule) -> tuple[int, ...]:
    def net(n):
        if n is None:
            return (1, 0, 0)
        return (0, int(n.network_address), int(n.netmask))

    lo, hi = rule.port if rule.port is not None else (0, 65535)
    proto = -1 if rule.proto is None else _proto_id(rule.proto)
    return (1 if rule.action == "allow" else 0, *net(rule.src), *net(rule.dst), proto, lo, hi)


@functools.lru_cache(maxsize=4096)
def _compiled(rules: tuple[FirewallRule, ...]):
    return kernels.prepare_rules([_encode_rule(r) for r in rules])


def evaluate_ruleset(rules: Sequence[FirewallRule], flow: FlowTuple) -> Verdict:
    """First matching rule decides; no match is a default deny."""
    rules = tuple(rules)
    if not rules:
        return DEFAULT_DENY
    src = -1 if flow.src is None else int(flow.src)
    dst = -1 if flow.dst is None else int(flow.dst)
    idx = kernels.first_match(_compiled(rules), src, dst, _proto_id(flow.proto), flow.port)
    if idx < 0:
        return DEFAULT_DENY
    return Verdict(rules[idx].action, idx)


def apply_nat(mappings: Iterable[NatMapping], flow: FlowTuple) -> FlowTuple:
    """Rewrite the flow with the first mapping that matches it, if any."""
    flow, _ = _apply_nat(mappings, flow)
    return flow


def _apply_nat(mappings: Iterable[NatMapping], flow: FlowTuple) -> tuple[FlowTuple, Optional[NatMapping]]:
    for m in mappings:
        if m.direction == "dst_rewrite" and flow.dst == m.external:
            return replace(flow, dst=m.internal), m
        if m.direction == "src_rewrite" and flow.src == m.internal:
            return replace(flow, src=m.external), m
    return flow, None


@dataclass(frozen=True)
class Path:
    hops: tuple[str, ...]
    translations: tuple[NatMapping, ...] = ()
    verdicts: tuple[tuple[str, Verdict], ...] = ()

    @property
    def admissible(self) -> bool:
        return all(v.allowed for _, v in self.verdicts)

    def first_block(self) -> Optional[tuple[str, Verdict]]:
        for hop, v in self.verdicts:
            if not v.allowed:
                return hop, v
        return None

    def sort_key(self):
        return (self.hops, tuple((m.direction, int(m.external), int(m.internal)) for m in self.translations))


class Topology:
    """Adjacency and capability tables derived once from a model."""

    def __init__(self, model: ArchModel):
        self.model = model
        self.comm: dict[str, CommEntity] = {
            e.id: e for e in model.entities.values() if isinstance(e, CommEntity) and e.kind != "network"
        }
        by_device: dict[str, list[str]] = {}
        for c in self.comm.values():
            if c.device is not None:
                by_device.setdefault(c.device, []).append(c.id)
        linked: dict[str, set[str]] = {}
        for e in model.entities.values():
            if isinstance(e, AssetEntity) and e.kind == "link" and e.link_endpoints and len(e.link_endpoints) == 2:
                a, b = e.link_endpoints
                if a != b:
                    linked.setdefault(a, set()).add(b)
                    linked.setdefault(b, set()).add(a)
        self.neighbors: dict[str, tuple[str, ...]] = {}
        for cid, c in self.comm.items():
            nbs: set[str] = set()
            if c.device is not None:
                nbs.update(by_device.get(c.device, ()))
                for other in linked.get(c.device, ()):
                    nbs.update(by_device.get(other, ()))
            nbs.discard(cid)
            self.neighbors[cid] = tuple(sorted(nbs))

        self.capabilities: dict[str, frozenset[str]] = {}
        for cid, c in self.comm.items():
            if c.kind != "endpoint":
                continue
            siblings = by_device.get(c.device, [cid]) if c.device is not None else [cid]
            protos = {name for s in siblings for name, _ in self.comm[s].services}
            for e in model.entities.values():
                if isinstance(e, ServiceEntity) and e.protocol and e.endpoint_ref in siblings:
                    protos.add(e.protocol)
            self.capabilities[cid] = frozenset(protos)

        self.public: dict[IPv4Address, list[IPv4Address]] = {}
        for c in self.comm.values():
            for m in c.nat:
                if m.direction == "dst_rewrite":
                    self.public.setdefault(m.internal, []).append(m.external)

    def endpoints(self) -> list[str]:
        return sorted(c for c, e in self.comm.items() if e.kind == "endpoint")

    def endpoint(self, eid: str) -> CommEntity:
        e = self.comm.get(eid)
        if e is None or e.kind != "endpoint":
            raise UnknownEntityError(f"unknown endpoint {eid!r}")
        return e

    def destination_ports(self, eid: str) -> list[tuple[str, int]]:
        """(protocol, port) pairs served on an endpoint's device, sorted."""
        ep = self.endpoint(eid)
        siblings = [c for c in self.comm.values() if ep.device is not None and c.device == ep.device] or [ep]
        return sorted({sp for c in siblings for sp in c.services})


def _next_hop(entity: CommEntity, dst: Optional[IPv4Address]) -> Optional[str]:
    best = None
    if dst is None:
        return None
    for r in entity.routes:
        if dst in r.destination and (best is None or r.destination.prefixlen > best.destination.prefixlen):
            best = r
    return None if best is None else best.next_hop


def find_paths(
    model: ArchModel,
    src: str,
    dst: str,
    proto: str,
    port: int,
    topology: Optional[Topology] = None,
) -> list[Path]:
    """All simple paths from ``src`` to ``dst`` with their inhibitor verdicts,
    sorted lexicographically by hop ids.
    """
    topo = topology or Topology(model)
    src_ep = topo.endpoint(src)
    dst_ep = topo.endpoint(dst)
    if src == dst:
        return [Path(())]

    targets = [dst_ep.address]
    if dst_ep.address is not None:
        targets += sorted(set(topo.public.get(dst_ep.address, ())))

    found: dict = {}

    def walk(node: str, flow: FlowTuple, hops: list[str], seen: set[str], trans: list, verdicts: list) -> None:
        entity = topo.comm[node]
        if entity.kind == "inhibitor" and len(hops) > 1:
            flow, m = _apply_nat([x for x in entity.nat if x.direction == "dst_rewrite"], flow)
            trans = trans + [m] if m else trans
            verdicts = verdicts + [(node, evaluate_ruleset(entity.ruleset or (), flow))]
            flow, m = _apply_nat([x for x in entity.nat if x.direction == "src_rewrite"], flow)
            trans = trans + [m] if m else trans
        allowed_next = None
        if entity.routes:
            hop = _next_hop(entity, flow.dst)
            allowed_next = {dst} if hop is None else {dst, hop}
        for nb in topo.neighbors[node]:
            if nb in seen or (allowed_next is not None and nb not in allowed_next):
                continue
            if nb == dst:
                if dst_ep.address is None or flow.dst == dst_ep.address:
                    path = Path(tuple(hops + [nb]), tuple(trans), tuple(verdicts))
                    found.setdefault(path.sort_key(), path)
                continue
            if topo.comm[nb].kind not in FORWARDING_KINDS:
                continue
            seen.add(nb)
            hops.append(nb)
            walk(nb, flow, hops, seen, trans, verdicts)
            hops.pop()
            seen.discard(nb)

    for target in targets:
        walk(src, FlowTuple(src_ep.address, target, proto, port), [src], {src}, [], [])
    return [found[k] for k in sorted(found)]


@dataclass(frozen=True)
class Reach:
    status: str  # reachable | blocked | no_path | protocol_mismatch
    blocker: Optional[str] = None
    rule_index: Optional[int] = None
    path: Optional[Path] = None

    def describe(self) -> str:
        if self.status == "blocked":
            rule = "default" if self.rule_index is None else str(self.rule_index)
            return f"blocked {self.blocker}:{rule}"
        return self.status


@dataclass
class ReachabilityMatrix:
    entries: dict[tuple[str, str, str, int], Reach]

    def reachable(self) -> set[tuple[str, str, str, int]]:
        return {k for k, v in self.entries.items() if v.status == "reachable"}

    def to_text(self) -> str:
        lines = [f"{s} {d} {p} {port} {self.entries[(s, d, p, port)].describe()}"
                 for (s, d, p, port) in sorted(self.entries)]
        return "\n".join(lines) + ("\n" if lines else "")

    def to_dict(self) -> list[dict]:
        out = []
        for key in sorted(self.entries):
            r = self.entries[key]
            out.append({
                "src": key[0], "dst": key[1], "proto": key[2], "port": key[3], "status": r.status,
                "blocker": r.blocker, "rule_index": r.rule_index,
                "path": list(r.path.hops) if r.path is not None else None,
            })
        return out


def reach_status(topo: Topology, src: str, dst: str, proto: str, port: int) -> Reach:
    topo.endpoint(src)
    if proto not in topo.capabilities.get(dst, frozenset()) and src != dst:
        topo.endpoint(dst)
        return Reach("protocol_mismatch")
    paths = find_paths(topo.model, src, dst, proto, port, topo)
    if not paths:
        return Reach("no_path")
    for p in paths:
        if p.admissible:
            return Reach("reachable", path=p)
    hop, verdict = paths[0].first_block()
    return Reach("blocked", hop, verdict.matched_rule_index, paths[0])


def _expand_queries(topo: Topology, queries) -> list[tuple[str, str, str, int]]:
    if queries is None:
        eps = topo.endpoints()
        queries = [(s, d) for s in eps for d in eps if s != d]
    out = []
    for q in queries:
        if len(q) == 4:
            out.append((q[0], q[1], q[2], int(q[3])))
            continue
        s, d = q
        ports = topo.destination_ports(d)
        if not ports:
            out.append((s, d, NO_PROTOCOL, 0))
        out.extend((s, d, name, port) for name, port in ports)
    return out


def compute_reachability(model: ArchModel, queries=None, topology: Optional[Topology] = None) -> ReachabilityMatrix:
    """Status for each query.

    ``queries`` holds ``(src, dst)`` pairs, expanded over the (protocol, port)
    pairs the destination serves, or explicit ``(src, dst, proto, port)``
    tuples.  ``None`` means every ordered pair of distinct endpoints.
    """
    topo = topology or Topology(model)
    entries = {}
    for key in _expand_queries(topo, queries):
        s, d, proto, port = key
        if proto == NO_PROTOCOL:
            topo.endpoint(s)
            topo.endpoint(d)
            entries[key] = Reach("protocol_mismatch")
        else:
            entries[key] = reach_status(topo, s, d, proto, port)
    return ReachabilityMatrix(entries)


@dataclass(frozen=True)
class Exposure:
    asset: str
    src: str
    dst: str
    proto: str
    port: int
    path: Path


def exposure_analysis(model: ArchModel, origin_zone: str, topology: Optional[Topology] = None) -> list[Exposure]:
    """Assets hosting an endpoint reachable from any endpoint whose device
    sits in ``origin_zone``; one record per asset, sorted by asset id.
    """
    zones = {
        e.zone for e in model.entities.values() if isinstance(e, AssetEntity) and e.kind == "device" and e.zone
    }
    if origin_zone not in zones:
        raise UnknownZoneError(f"no device lies in zone {origin_zone!r}")
    topo = topology or Topology(model)
    eps = topo.endpoints()
    sources = [s for s in eps if effective_zone(model, s) == origin_zone]
    best: dict[str, Exposure] = {}
    for s in sources:
        for d in eps:
            asset = topo.comm[d].device
            if d == s or asset is None or asset == topo.comm[s].device:
                continue
            for proto, port in topo.destination_ports(d):
                r = reach_status(topo, s, d, proto, port)
                if r.status == "reachable" and asset not in best:
                    best[asset] = Exposure(asset, s, d, proto, port, r.path)
    return [best[a] for a in sorted(best)]
