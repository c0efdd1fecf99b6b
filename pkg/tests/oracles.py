"""Independent reference implementations and random model generators.

Nothing here calls into the code under test beyond plain data types and
``match_rule``, which is itself checked against hand-written cases.
"""

from __future__ import annotations

import itertools
import random
from collections import deque
from ipaddress import IPv4Address, IPv4Network

from archview.model import (
    ArchModel,
    AssetEntity,
    CommEntity,
    Composition,
    CrossLayerEdge,
    DataFlow,
    EnforcementRef,
    FirewallRule,
    Layer,
    NatMapping,
    OrgEntity,
    Privilege,
    ProcessStep,
    Route,
    ServiceEntity,
    SLA,
    ViewpointSpec,
    materialize_edges,
)
from archview.reachability import FlowTuple, match_rule

PROTOCOLS = (("tcp", 80), ("modbus", 502), ("rdp", 3389), ("dnp3", 20000))


# --------------------------------------------------------------------------
# reachability


def _first_match(rules, flow):
    for i, r in enumerate(rules):
        if match_rule(r, flow):
            return r.action, i
    return "deny", None


def _comm_graph(model):
    comm = {e.id: e for e in model.entities.values() if isinstance(e, CommEntity) and e.kind != "network"}
    links = set()
    for e in model.entities.values():
        if isinstance(e, AssetEntity) and e.kind == "link" and e.link_endpoints:
            a, b = e.link_endpoints
            links.add((a, b))
            links.add((b, a))
    adj = {c: set() for c in comm}
    for a, b in itertools.permutations(comm, 2):
        da, db = comm[a].device, comm[b].device
        if da is None or db is None:
            continue
        if da == db or (da, db) in links:
            adj[a].add(b)
    return comm, adj


def _simple_paths(comm, adj, src, dst):
    """Every simple path src..dst whose interior hops forward traffic."""
    out = []
    stack = [(src, (src,))]
    while stack:
        node, path = stack.pop()
        for nb in adj[node]:
            if nb in path:
                continue
            if nb == dst:
                out.append(path + (nb,))
            elif comm[nb].kind in ("enabler", "inhibitor"):
                stack.append((nb, path + (nb,)))
    return out


def _route(entity, dst):
    best = None
    for r in entity.routes:
        if dst is not None and dst in r.destination:
            if best is None or r.destination.prefixlen > best.destination.prefixlen:
                best = r
    return best


def _simulate(comm, hops, flow):
    """Replay a flow along fixed hops; None when routing or NAT rules it out."""
    trans, verdicts = [], []
    for i, hop in enumerate(hops[:-1]):
        e = comm[hop]
        if i > 0 and e.kind == "inhibitor":
            for m in e.nat:
                if m.direction == "dst_rewrite" and flow.dst == m.external:
                    flow = FlowTuple(flow.src, m.internal, flow.proto, flow.port)
                    trans.append(m)
                    break
            verdicts.append((hop, _first_match(e.ruleset or (), flow)))
            for m in e.nat:
                if m.direction == "src_rewrite" and flow.src == m.internal:
                    flow = FlowTuple(m.external, flow.dst, flow.proto, flow.port)
                    trans.append(m)
                    break
        if e.routes:
            nxt = hops[i + 1]
            r = _route(e, flow.dst)
            if nxt != hops[-1] and (r is None or r.next_hop != nxt):
                return None
    dst = comm[hops[-1]]
    if dst.address is not None and flow.dst != dst.address:
        return None
    return tuple(trans), tuple(verdicts)


def oracle_reach(model, src, dst, proto, port, _paths=None):
    """(status, blocker, rule_index, hops) by exhaustive path enumeration."""
    comm, adj = _comm_graph(model)
    s, d = comm[src], comm[dst]
    if src == dst:
        return ("reachable", None, None, ())
    caps = {name for c in comm.values() if c.device == d.device for name, _ in c.services}
    caps |= {name for name, _ in d.services}
    for e in model.entities.values():
        if isinstance(e, ServiceEntity) and e.protocol and e.endpoint_ref in comm:
            if comm[e.endpoint_ref].device == d.device:
                caps.add(e.protocol)
    if proto not in caps:
        return ("protocol_mismatch", None, None, None)
    targets = [d.address]
    if d.address is not None:
        targets += sorted({m.external for c in comm.values() for m in c.nat
                           if m.direction == "dst_rewrite" and m.internal == d.address})
    records = {}
    paths = _paths if _paths is not None else _simple_paths(comm, adj, src, dst)
    for hops in paths:
        for t in targets:
            sim = _simulate(comm, hops, FlowTuple(s.address, t, proto, port))
            if sim is None:
                continue
            trans, verdicts = sim
            key = (hops, tuple((m.direction, int(m.external), int(m.internal)) for m in trans))
            records.setdefault(key, verdicts)
    if not records:
        return ("no_path", None, None, None)
    ordered = sorted(records)
    for key in ordered:
        if all(v[0] == "allow" for _, v in records[key]):
            return ("reachable", None, None, key[0])
    first = ordered[0]
    for hop, (action, idx) in records[first]:
        if action != "allow":
            return ("blocked", hop, idx, first[0])
    raise AssertionError("unreachable")


def oracle_matrix(model):
    comm, adj = _comm_graph(model)
    eps = sorted(c for c, e in comm.items() if e.kind == "endpoint")
    out = {}
    for s in eps:
        for d in eps:
            if s == d:
                continue
            dev = comm[d].device
            ports = sorted({sp for c in comm.values() if dev is not None and c.device == dev for sp in c.services}
                           | set(comm[d].services))
            if not ports:
                out[(s, d, "none", 0)] = ("protocol_mismatch", None, None, None)
            paths = _simple_paths(comm, adj, s, d)
            for proto, port in ports:
                out[(s, d, proto, port)] = oracle_reach(model, s, d, proto, port, paths)
    return out


def random_rule(rng: random.Random, nets, addrs, action=None):
    def side():
        r = rng.random()
        if r < 0.35:
            return None
        if r < 0.7 or not addrs:
            return rng.choice(nets)
        return IPv4Network(f"{rng.choice(addrs)}/32")

    proto = None if rng.random() < 0.4 else rng.choice(PROTOCOLS)[0]
    r = rng.random()
    if r < 0.4:
        port = None
    elif r < 0.8:
        p = rng.choice(PROTOCOLS)[1]
        port = (p, p)
    else:
        lo = rng.randrange(0, 30000)
        port = (lo, lo + rng.randrange(0, 30000))
    return FirewallRule(action or rng.choice(("allow", "allow", "deny")), side(), side(), proto, port)


def random_comm_model(rng: random.Random, max_comm: int = 12, nat: bool = True) -> ArchModel:
    """A valid model with a random small topology and rulesets."""
    m = ArchModel("random")
    n_comm = rng.randint(2, max_comm)
    # at most two comm entities per device and a sparse link graph (a random
    # tree plus a few chords) keep the simple-path count small
    n_dev = rng.randint(max(2, -(-n_comm // 2)), 8)
    devices = [f"d{i}" for i in range(n_dev)]
    for d in devices:
        m.add_entity(Layer.ASSET, AssetEntity(d, "device", zone=rng.choice(("a", "b", "internet"))))
    links = set()
    for i in range(1, n_dev):
        if rng.random() < 0.9:
            links.add((devices[rng.randrange(i)], devices[i]))
    pairs = [p for p in itertools.combinations(devices, 2) if p not in links]
    links.update(rng.sample(pairs, min(len(pairs), rng.randint(0, 2))))
    for i, (a, b) in enumerate(sorted(links)):
        m.add_entity(Layer.ASSET, AssetEntity(f"l{i}", "link", link_endpoints=(a, b)))
    nets = [IPv4Network(f"10.0.{k}.0/24") for k in range(rng.randint(1, 3))]
    for k, n in enumerate(nets):
        m.add_entity(Layer.COMMUNICATION, CommEntity(f"net{k}", "network", range=n))
    n_ep = rng.randint(2, max(2, n_comm // 2))
    addrs = []
    forwarding = []
    slots = [d for d in devices for _ in range(2)]
    rng.shuffle(slots)
    for i in range(n_comm):
        dev = slots[i]
        if i < n_ep:
            net = rng.choice(nets)
            addr = net.network_address + 1 + len(addrs)
            addrs.append(addr)
            services = tuple(sorted(rng.sample(PROTOCOLS, rng.randint(0, 2))))
            m.add_entity(Layer.COMMUNICATION, CommEntity(f"e{i}", "endpoint", device=dev, address=addr,
                                                         services=services))
        elif rng.random() < 0.5:
            forwarding.append(f"e{i}")
            m.add_entity(Layer.COMMUNICATION, CommEntity(f"e{i}", "enabler", device=dev, enabler_class="switch"))
        else:
            forwarding.append(f"e{i}")
            rules = tuple(random_rule(rng, nets, addrs) for _ in range(rng.randint(0, 4)))
            m.add_entity(Layer.COMMUNICATION, CommEntity(f"e{i}", "inhibitor", device=dev, ruleset=rules))
    for fid in forwarding:
        e = m.entities[fid]
        changes = {}
        if rng.random() < 0.3:
            routes = [Route(rng.choice(nets), rng.choice(forwarding)) for _ in range(rng.randint(1, 2))]
            if rng.random() < 0.5:
                routes.append(Route(IPv4Network("0.0.0.0/0"), rng.choice(forwarding)))
            changes["routes"] = tuple(routes)
        if nat and e.kind == "inhibitor" and rng.random() < 0.4:
            maps = []
            if rng.random() < 0.7:
                maps.append(NatMapping(IPv4Address(f"192.0.2.{rng.randint(1, 9)}"), rng.choice(addrs), "dst_rewrite"))
            if rng.random() < 0.5:
                maps.append(NatMapping(IPv4Address(f"192.0.2.{rng.randint(10, 19)}"), rng.choice(addrs), "src_rewrite"))
            changes["nat"] = tuple(maps)
        if changes:
            m.replace_entity(_replace(e, **changes))
    materialize_edges(m)
    return m


def _replace(e, **kw):
    from dataclasses import replace

    return replace(e, **kw)


# --------------------------------------------------------------------------
# graphs and probability


class UnionFind:
    def __init__(self):
        self.parent = {}

    def find(self, x):
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[ra] = rb
        return True


def has_undirected_cycle(edges) -> bool:
    uf = UnionFind()
    return any(not uf.union(u, v) for u, v, *_ in edges)


def kruskal_max_forest(edges):
    """Edges kept by a maximum spanning forest under the (p, source, target,
    kind) order, largest first.
    """
    uf = UnionFind()
    kept = []
    for e in sorted(edges, key=lambda e: (e.p, e.source, e.target, e.kind), reverse=True):
        if uf.union(e.source, e.target):
            kept.append(e)
    return sorted(kept)


def brute_force_compromise(nodes, edges, seeds):
    """Sum over all 2^m activation subsets in plain Python."""
    out = {n: 0.0 for n in nodes}
    m = len(edges)
    for mask in range(1 << m):
        w = 1.0
        active = []
        for i, (u, v, p) in enumerate(edges):
            if mask >> i & 1:
                w *= p
                active.append((u, v))
            else:
                w *= 1.0 - p
        if w == 0.0:
            continue
        reached = set(seeds)
        frontier = deque(seeds)
        while frontier:
            x = frontier.popleft()
            for u, v in active:
                if u == x and v not in reached:
                    reached.add(v)
                    frontier.append(v)
        for n in reached:
            out[n] += w
    for s in seeds:
        out[s] = 1.0
    return out


def random_polytree(rng: random.Random, max_edges: int = 20):
    """Random oriented forest: nodes, [(u, v, p)]."""
    n = rng.randint(1, max_edges + 1)
    nodes = [f"n{i:02d}" for i in range(n)]
    edges = []
    for i in range(1, n):
        if rng.random() < 0.9:
            j = rng.randrange(i)
            u, v = (nodes[j], nodes[i]) if rng.random() < 0.6 else (nodes[i], nodes[j])
            p = rng.choice((0.0, 1.0, round(rng.random(), 3), rng.random()))
            edges.append((u, v, p))
    return nodes, edges


def bfs_closure(model, seeds, kinds=None, depth=None):
    """Level-by-level expansion written without any shared helpers."""
    level = set(seeds)
    seen = set(seeds)
    d = 0
    while level and (depth is None or d < depth):
        nxt = set()
        for e in model.edges:
            if kinds is not None and e.kind not in kinds:
                continue
            if e.source not in model.entities or e.target not in model.entities:
                continue
            if e.source in level and e.target not in seen:
                nxt.add(e.target)
            if e.target in level and e.source not in seen:
                nxt.add(e.source)
        seen |= nxt
        level = nxt
        d += 1
    return seen


# --------------------------------------------------------------------------
# full random models for parser round trips

_WORDS = ("alpha", "beta", "gamma", "delta", "omega", "rho")


def _text(rng):
    pieces = [rng.choice(_WORDS) for _ in range(rng.randint(1, 3))]
    if rng.random() < 0.3:
        pieces.append(rng.choice(('"quoted"', "back\\slash", "tab\there", "line\nbreak", "ünï")))
    return " ".join(pieces)


def random_full_model(rng: random.Random) -> ArchModel:
    """A valid model exercising every declaration kind and attribute."""
    m = random_comm_model(rng, max_comm=8, nat=True)
    m.name = f"rt_{rng.randint(0, 999)} {_text(rng)}"
    devices = sorted(e.id for e in m.entities.values() if isinstance(e, AssetEntity) and e.kind == "device")
    for eid in list(devices):
        e = m.entities[eid]
        if rng.random() < 0.5:
            m.replace_entity(_replace(e, device_class=rng.choice(("server", "plc", "rtu", "workstation"))))
    for l in [e for e in list(m.entities.values()) if isinstance(e, AssetEntity) and e.kind == "link"]:
        if rng.random() < 0.5:
            m.replace_entity(_replace(l, medium=rng.choice(("ethernet", "serial", "radio"))))
    sw = []
    for i in range(rng.randint(0, 3)):
        kind = rng.choice(("software", "data"))
        sid = f"sw{i}"
        m.add_entity(Layer.ASSET, AssetEntity(sid, kind, host=rng.choice(devices),
                                              zone=rng.choice((None, "a", "b"))))
        if kind == "software":
            sw.append(sid)
    eps = sorted(e.id for e in m.entities.values() if isinstance(e, CommEntity) and e.kind == "endpoint")
    services = []
    for i in range(rng.randint(0, 5)):
        sid = f"svc{i}"
        kwargs = {"host": rng.choice(devices + sw)}
        if rng.random() < 0.6:
            kwargs["endpoint_ref"] = rng.choice(eps)
        if rng.random() < 0.5:
            kwargs["protocol"] = rng.choice(PROTOCOLS)[0]
        if rng.random() < 0.5:
            kwargs["description"] = _text(rng)
        if rng.random() < 0.4:
            kwargs["operations"] = tuple(rng.sample(_WORDS, rng.randint(0, 3)))
        if rng.random() < 0.3:
            kwargs["schema"] = rng.choice(("json", "xml"))
        if rng.random() < 0.3:
            kwargs["fault_policy"] = _text(rng)
        if rng.random() < 0.3:
            kwargs["sla"] = SLA(
                rng.choice((0.5, 0.999, 1.0, rng.random())), rng.choice((10.0, 250.0, rng.random() * 500))
            )
        if rng.random() < 0.3:
            kwargs["requires_auth"] = True
        if rng.random() < 0.2:
            kwargs["auth"] = True
        if rng.random() < 0.2:
            kwargs["vulnerable"] = True
            if rng.random() < 0.5:
                kwargs["vulnerability_note"] = _text(rng)
        m.add_entity(Layer.SERVICE, ServiceEntity(sid, **kwargs))
        services.append(sid)
    if len(services) >= 2:
        for i in range(rng.randint(0, 3)):
            a, b = rng.sample(services, 2)
            m.add_entity(Layer.SERVICE, DataFlow(f"flow{i}", a, b, protocol=rng.choice((None, "tcp")),
                                                 payload=rng.choice((None, _text(rng)))))
        if rng.random() < 0.6:
            outer = services[0]
            inner = tuple(rng.sample(services[1:], rng.randint(1, len(services) - 1)))
            m.add_entity(Layer.SERVICE, Composition("comp0", outer, inner))
    targets = sorted(m.entities)
    roles = []
    for i in range(rng.randint(0, 2)):
        rid = f"role{i}"
        privs = tuple(Privilege(rng.choice(("read", "write", "configure", "operate")), rng.choice(targets))
                      for _ in range(rng.randint(0, 3)))
        m.add_entity(Layer.ORGANIZATION, OrgEntity(rid, "role", privileges=privs))
        roles.append(rid)
    for i in range(rng.randint(0, 2)):
        m.add_entity(Layer.ORGANIZATION, OrgEntity(f"person{i}", "person",
                                                   roles=tuple(rng.sample(roles, rng.randint(0, len(roles))))))
    if roles:
        steps = tuple(
            ProcessStep(_text(rng), rng.choice(roles),
                        tuple(Privilege("read", rng.choice(targets)) for _ in range(rng.randint(0, 2))))
            for _ in range(rng.randint(1, 3))
        )
        m.add_entity(Layer.ORGANIZATION, OrgEntity("proc0", "process", steps=steps))
    inhibitors = [e for e in m.entities.values() if isinstance(e, CommEntity) and e.kind == "inhibitor"]
    mechanisms = [EnforcementRef(s) for s in services]
    for inh in inhibitors:
        mechanisms.append(EnforcementRef(inh.id))
        for k in range(len(inh.ruleset or ())):
            mechanisms.append(EnforcementRef(inh.id, k))
    for i in range(rng.randint(0, 2)):
        refs = tuple(rng.sample(mechanisms, min(len(mechanisms), rng.randint(0, 2))))
        m.add_entity(Layer.ORGANIZATION, OrgEntity(
            f"pol{i}", "policy", statement=rng.choice((None, _text(rng))), enforced_by=refs,
            governs=tuple(rng.sample(targets, rng.randint(0, 2)))))
    materialize_edges(m)
    # attach probabilities to some edges and add free-standing dependencies
    for e in list(m.edges):
        if rng.random() < 0.2:
            m.replace_edge(CrossLayerEdge(e.kind, e.source, e.target, rng.choice((0.0, 0.5, 1.0, rng.random()))))
    ids = sorted(m.entities)
    for _ in range(rng.randint(0, 3)):
        a, b = rng.sample(ids, 2)
        if not m.has_edge("depends_on", a, b):
            m.add_edge(CrossLayerEdge("depends_on", a, b, rng.choice((None, 0.25))))
    for i in range(rng.randint(0, 2)):
        name = f"vp{i}"
        m.viewpoint_specs[name] = ViewpointSpec(
            name,
            layers=frozenset(rng.sample(list(Layer), rng.randint(0, 2))),
            zones=frozenset(rng.sample(["a", "b", "internet"], rng.randint(0, 2))),
            kinds=frozenset(rng.sample(["device", "endpoint", "service"], rng.randint(0, 2))),
            seeds=frozenset(rng.sample(ids, rng.randint(0, 2))),
            expand=frozenset(rng.sample(["hosted_on", "flows_to", "bound_to"], rng.randint(0, 2))),
            depth=rng.choice((None, 0, 1, 3)),
        )
    return m
