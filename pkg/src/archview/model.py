"""Four-layer architecture metamodel.

An :class:`ArchModel` holds entities from the asset, communication, service
and organization layers plus the typed cross-layer edges between them.
Entities are frozen dataclasses; the model itself is a mutable container that
is built once (usually by the ADL parser) and then treated as read-only by
the analysis modules.

References between entities live in two places: in entity fields (a
software entity's ``host``) and as :class:`CrossLayerEdge` records.  The
edges implied by entity fields are computed by :func:`implied_edges`;
:func:`validate_model` insists that every implied edge is actually present so
that graph traversals and the serialized form agree.
"""

from __future__ import annotations

import copy
import re
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from ipaddress import IPv4Address, IPv4Network
from typing import Iterable, Iterator, Optional, Union

from .errors import DuplicateEdgeError, DuplicateIdError, LayerMismatchError, UnknownEntityError


class Layer(str, Enum):
    ASSET = "asset"
    COMMUNICATION = "communication"
    SERVICE = "service"
    ORGANIZATION = "organization"

    def __str__(self) -> str:
        return self.value


LAYER_ORDER = (Layer.ASSET, Layer.COMMUNICATION, Layer.SERVICE, Layer.ORGANIZATION)

ASSET_KINDS = ("device", "link", "software", "data")
DEVICE_CLASSES = (
    "workstation", "server", "ied", "rtu", "plc", "dcs", "sensor", "actuator",
    "firewall_appliance", "router_appliance", "other",
)
MEDIA = ("ethernet", "serial", "dialup", "leased_line", "power_line", "radio", "wan")
COMM_KINDS = ("endpoint", "enabler", "inhibitor", "network")
ENABLER_CLASSES = ("hub", "switch", "router", "vlan")
SERVICE_KINDS = ("service", "flow", "composition")
ORG_KINDS = ("person", "role", "process", "policy")
RIGHTS = ("read", "write", "configure", "operate")
NAT_DIRECTIONS = ("dst_rewrite", "src_rewrite")
EDGE_KINDS = (
    "hosted_on", "bound_to", "flows_to", "composed_with",
    "operated_by", "governed_by", "enforced_by", "depends_on",
)
KINDS_BY_LAYER = {
    Layer.ASSET: ASSET_KINDS,
    Layer.COMMUNICATION: COMM_KINDS,
    Layer.SERVICE: SERVICE_KINDS,
    Layer.ORGANIZATION: ORG_KINDS,
}

ID_PATTERN = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
TOKEN_PATTERN = ID_PATTERN


# --------------------------------------------------------------------------
# communication-layer value types


@dataclass(frozen=True)
class FirewallRule:
    """One filter rule.  ``None`` in any match field is the wildcard ``any``."""

    action: str
    src: Optional[IPv4Network] = None
    dst: Optional[IPv4Network] = None
    proto: Optional[str] = None
    port: Optional[tuple[int, int]] = None


@dataclass(frozen=True)
class NatMapping:
    external: IPv4Address
    internal: IPv4Address
    direction: str = "dst_rewrite"


@dataclass(frozen=True)
class Route:
    destination: IPv4Network
    next_hop: str


# --------------------------------------------------------------------------
# entities


@dataclass(frozen=True)
class AssetEntity:
    id: str
    kind: str
    device_class: Optional[str] = None
    zone: Optional[str] = None
    host: Optional[str] = None
    link_endpoints: Optional[tuple[str, str]] = None
    medium: Optional[str] = None


@dataclass(frozen=True)
class CommEntity:
    id: str
    kind: str
    device: Optional[str] = None
    address: Optional[IPv4Address] = None
    range: Optional[IPv4Network] = None
    zone: Optional[str] = None  # networks only; other kinds inherit from their device
    enabler_class: Optional[str] = None
    routes: tuple[Route, ...] = ()
    ruleset: Optional[tuple[FirewallRule, ...]] = None
    nat: tuple[NatMapping, ...] = ()
    services: tuple[tuple[str, int], ...] = ()


@dataclass(frozen=True)
class SLA:
    availability: float
    responsiveness_ms: float


@dataclass(frozen=True)
class ServiceEntity:
    id: str
    host: Optional[str] = None
    description: str = ""
    operations: tuple[str, ...] = ()
    endpoint_ref: Optional[str] = None
    protocol: Optional[str] = None
    schema: Optional[str] = None
    fault_policy: str = ""
    sla: Optional[SLA] = None
    requires_auth: bool = False
    auth: bool = False
    vulnerable: bool = False
    vulnerability_note: Optional[str] = None
    kind: str = field(default="service", init=False)


@dataclass(frozen=True)
class DataFlow:
    id: str
    source: str
    target: str
    protocol: Optional[str] = None
    payload: Optional[str] = None
    kind: str = field(default="flow", init=False)


@dataclass(frozen=True)
class Composition:
    id: str
    outer: str
    inner: tuple[str, ...] = ()
    kind: str = field(default="composition", init=False)


@dataclass(frozen=True)
class Privilege:
    right: str
    target: str


@dataclass(frozen=True)
class ProcessStep:
    task: str
    actor: str
    delegated: tuple[Privilege, ...] = ()


@dataclass(frozen=True)
class EnforcementRef:
    """A mechanism named by a policy, optionally narrowed to one firewall rule."""

    target: str
    rule_index: Optional[int] = None


@dataclass(frozen=True)
class OrgEntity:
    id: str
    kind: str
    roles: tuple[str, ...] = ()
    privileges: tuple[Privilege, ...] = ()
    steps: tuple[ProcessStep, ...] = ()
    statement: Optional[str] = None
    enforced_by: tuple[EnforcementRef, ...] = ()
    governs: tuple[str, ...] = ()


Entity = Union[AssetEntity, CommEntity, ServiceEntity, DataFlow, Composition, OrgEntity]

_LAYER_OF_TYPE = {
    AssetEntity: Layer.ASSET,
    CommEntity: Layer.COMMUNICATION,
    ServiceEntity: Layer.SERVICE,
    DataFlow: Layer.SERVICE,
    Composition: Layer.SERVICE,
    OrgEntity: Layer.ORGANIZATION,
}


def layer_of_entity(entity: Entity) -> Layer:
    try:
        return _LAYER_OF_TYPE[type(entity)]
    except KeyError:
        raise TypeError(f"not an entity: {entity!r}") from None


@dataclass(frozen=True)
class CrossLayerEdge:
    kind: str
    source: str
    target: str
    p: Optional[float] = None

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.kind, self.source, self.target)


@dataclass(frozen=True)
class ViewpointSpec:
    """Declarative entity selection; empty filter sets mean "no restriction"."""

    name: str
    layers: frozenset[Layer] = frozenset()
    zones: frozenset[str] = frozenset()
    kinds: frozenset[str] = frozenset()
    seeds: frozenset[str] = frozenset()
    expand: frozenset[str] = frozenset()
    depth: Optional[int] = None


@dataclass(frozen=True, order=True)
class Violation:
    subject: str
    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.subject}: {self.code}: {self.message}"


# --------------------------------------------------------------------------
# the model container


@dataclass(eq=False)
class ArchModel:
    name: str = "model"
    entities: dict[str, Entity] = field(default_factory=dict)
    edges: list[CrossLayerEdge] = field(default_factory=list)
    viewpoint_specs: dict[str, ViewpointSpec] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self._edge_index = {e.key: i for i, e in enumerate(self.edges)}

    def add_entity(self, layer: Union[Layer, str], entity: Entity) -> str:
        layer = Layer(layer)
        actual = layer_of_entity(entity)
        if actual is not layer or entity.kind not in KINDS_BY_LAYER[layer]:
            raise LayerMismatchError(f"{entity.kind} {entity.id!r} does not belong to the {layer} layer")
        if entity.id in self.entities:
            raise DuplicateIdError(f"duplicate id {entity.id!r}")
        self.entities[entity.id] = entity
        return entity.id

    def add_edge(self, edge: CrossLayerEdge) -> CrossLayerEdge:
        if edge.key in self._edge_index:
            raise DuplicateEdgeError(f"duplicate edge {edge.kind}({edge.source} -> {edge.target})")
        self._edge_index[edge.key] = len(self.edges)
        self.edges.append(edge)
        return edge

    def replace_edge(self, edge: CrossLayerEdge) -> None:
        self.edges[self._edge_index[edge.key]] = edge

    def remove_edge(self, key: tuple[str, str, str]) -> None:
        idx = self._edge_index.pop(key)
        del self.edges[idx]
        self._edge_index = {e.key: i for i, e in enumerate(self.edges)}

    def has_edge(self, kind: str, source: str, target: str) -> bool:
        return (kind, source, target) in self._edge_index

    def get_edge(self, kind: str, source: str, target: str) -> Optional[CrossLayerEdge]:
        i = self._edge_index.get((kind, source, target))
        return None if i is None else self.edges[i]

    def replace_entity(self, entity: Entity) -> None:
        if entity.id not in self.entities:
            raise UnknownEntityError(entity.id)
        if layer_of_entity(entity) is not self.layer_of(entity.id):
            raise LayerMismatchError(entity.id)
        self.entities[entity.id] = entity

    def remove_entity(self, eid: str) -> Entity:
        """Drop an entity; edges that mention it are left dangling on purpose."""
        return self.entities.pop(eid)

    def __contains__(self, eid: object) -> bool:
        return eid in self.entities

    def __getitem__(self, eid: str) -> Entity:
        return self.entities[eid]

    def get(self, eid: str) -> Optional[Entity]:
        return self.entities.get(eid)

    def layer_of(self, eid: str) -> Layer:
        return layer_of_entity(self.entities[eid])

    def ids(self, layer: Optional[Layer] = None) -> list[str]:
        if layer is None:
            return sorted(self.entities)
        return sorted(i for i, e in self.entities.items() if layer_of_entity(e) is layer)

    def of_kind(self, *kinds: str) -> list[Entity]:
        return [self.entities[i] for i in sorted(self.entities) if self.entities[i].kind in kinds]

    def copy(self) -> "ArchModel":
        return copy.deepcopy(self)

    def edge_map(self) -> dict[tuple[str, str, str], Optional[float]]:
        return {e.key: e.p for e in self.edges}

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ArchModel):
            return NotImplemented
        return (
            self.name == other.name
            and self.entities == other.entities
            and self.edge_map() == other.edge_map()
            and self.viewpoint_specs == other.viewpoint_specs
        )

    def __repr__(self) -> str:
        return f"ArchModel({self.name!r}, {len(self.entities)} entities, {len(self.edges)} edges)"


def add_entity(model: ArchModel, layer: Union[Layer, str], entity: Entity) -> str:
    return model.add_entity(layer, entity)


def add_edge(model: ArchModel, edge: CrossLayerEdge) -> CrossLayerEdge:
    return model.add_edge(edge)


# --------------------------------------------------------------------------
# references and implied edges

_ANY = None
_DEVICE = {(Layer.ASSET, "device")}
_HOSTABLE = {(Layer.ASSET, "device"), (Layer.ASSET, "software")}
_FORWARDING = {(Layer.COMMUNICATION, k) for k in ("endpoint", "enabler", "inhibitor")}
_ENDPOINT = {(Layer.COMMUNICATION, "endpoint")}
_SERVICE = {(Layer.SERVICE, "service")}
_ROLE = {(Layer.ORGANIZATION, "role")}
_MECHANISM = {(Layer.COMMUNICATION, "inhibitor"), (Layer.SERVICE, "service")}


def references(entity: Entity) -> Iterator[tuple[str, str, Optional[set]]]:
    """Yield ``(field, target_id, allowed (layer, kind) pairs or None)``."""
    if isinstance(entity, AssetEntity):
        if entity.host is not None:
            yield "host", entity.host, _DEVICE
        for d in entity.link_endpoints or ():
            yield "endpoints", d, _DEVICE
    elif isinstance(entity, CommEntity):
        if entity.device is not None:
            yield "device", entity.device, _DEVICE
        for r in entity.routes:
            yield "routes", r.next_hop, _FORWARDING
    elif isinstance(entity, ServiceEntity):
        if entity.host is not None:
            yield "host", entity.host, _HOSTABLE
        if entity.endpoint_ref is not None:
            yield "endpoint", entity.endpoint_ref, _ENDPOINT
    elif isinstance(entity, DataFlow):
        yield "from", entity.source, _SERVICE
        yield "to", entity.target, _SERVICE
    elif isinstance(entity, Composition):
        yield "outer", entity.outer, _SERVICE
        for i in entity.inner:
            yield "composed_of", i, _SERVICE
    elif isinstance(entity, OrgEntity):
        for r in entity.roles:
            yield "roles", r, _ROLE
        for pv in entity.privileges:
            yield "privileges", pv.target, _ANY
        for st in entity.steps:
            yield "steps", st.actor, _ROLE
            for pv in st.delegated:
                yield "steps", pv.target, _ANY
        for ref in entity.enforced_by:
            yield "enforced_by", ref.target, _MECHANISM
        for g in entity.governs:
            yield "governs", g, _ANY


def implied_edges(entity: Entity) -> list[CrossLayerEdge]:
    """Edges that an entity's reference fields stand for, without duplicates."""
    out: dict[tuple[str, str, str], CrossLayerEdge] = {}

    def put(kind: str, src: str, dst: str) -> None:
        out.setdefault((kind, src, dst), CrossLayerEdge(kind, src, dst))

    eid = entity.id
    if isinstance(entity, AssetEntity):
        if entity.kind in ("software", "data") and entity.host is not None:
            put("hosted_on", eid, entity.host)
        if entity.kind == "link":
            for d in entity.link_endpoints or ():
                put("depends_on", eid, d)
    elif isinstance(entity, CommEntity):
        if entity.device is not None:
            put("bound_to", eid, entity.device)
    elif isinstance(entity, ServiceEntity):
        if entity.host is not None:
            put("hosted_on", eid, entity.host)
        if entity.endpoint_ref is not None:
            put("bound_to", eid, entity.endpoint_ref)
    elif isinstance(entity, DataFlow):
        put("flows_to", entity.source, entity.target)
    elif isinstance(entity, Composition):
        for i in entity.inner:
            put("composed_with", entity.outer, i)
    elif isinstance(entity, OrgEntity):
        for r in entity.roles:
            put("operated_by", r, eid)
        for pv in entity.privileges:
            put("operated_by", pv.target, eid)
        for st in entity.steps:
            put("operated_by", eid, st.actor)
        for ref in entity.enforced_by:
            put("enforced_by", eid, ref.target)
        for g in entity.governs:
            put("governed_by", g, eid)
    return list(out.values())


def materialize_edges(model: ArchModel) -> int:
    """Add every implied edge that is not yet present; return how many were added."""
    added = 0
    for eid in sorted(model.entities):
        for edge in implied_edges(model.entities[eid]):
            if not model.has_edge(*edge.key):
                model.add_edge(edge)
                added += 1
    return added


# (source layer/kind set, target layer/kind set); None = any
_L = Layer
_EDGE_RULES: dict[str, list[tuple[Optional[set], Optional[set]]]] = {
    "hosted_on": [({(_L.ASSET, "software"), (_L.ASSET, "data"), (_L.SERVICE, "service")}, _HOSTABLE)],
    "bound_to": [
        (_FORWARDING, _DEVICE),
        (_SERVICE, _ENDPOINT),
        ({(_L.ASSET, "link")}, {(_L.COMMUNICATION, k) for k in COMM_KINDS}),
    ],
    "flows_to": [(_SERVICE, _SERVICE)],
    "composed_with": [(_SERVICE, _SERVICE)],
    "operated_by": [(None, {(_L.ORGANIZATION, "person"), (_L.ORGANIZATION, "role")})],
    "governed_by": [(None, {(_L.ORGANIZATION, "policy")})],
    "enforced_by": [({(_L.ORGANIZATION, "policy")}, _MECHANISM)],
    "depends_on": [(None, None)],
}


def _lk(model: ArchModel, eid: str) -> tuple[Layer, str]:
    e = model.entities[eid]
    return (layer_of_entity(e), e.kind)


def edge_layers_ok(model: ArchModel, edge: CrossLayerEdge) -> bool:
    src, dst = _lk(model, edge.source), _lk(model, edge.target)
    for allowed_src, allowed_dst in _EDGE_RULES.get(edge.kind, []):
        if (allowed_src is None or src in allowed_src) and (allowed_dst is None or dst in allowed_dst):
            return True
    return False


# --------------------------------------------------------------------------
# validation


def _port_ok(p: int) -> bool:
    return isinstance(p, int) and not isinstance(p, bool) and 0 <= p <= 65535


def _check_entity(model: ArchModel, e: Entity, networks: list[CommEntity]) -> Iterator[tuple[str, str]]:
    if not ID_PATTERN.match(e.id):
        yield "invalid_id", f"id {e.id!r} is not a token"
    layer = layer_of_entity(e)
    if e.kind not in KINDS_BY_LAYER[layer]:
        yield "invalid_kind", f"unknown {layer} kind {e.kind!r}"
        return

    if isinstance(e, AssetEntity):
        if e.device_class is not None and (e.kind != "device" or e.device_class not in DEVICE_CLASSES):
            yield "invalid_attribute", f"device class {e.device_class!r} not valid here"
        if e.medium is not None and (e.kind != "link" or e.medium not in MEDIA):
            yield "invalid_attribute", f"medium {e.medium!r} not valid here"
        if e.kind in ("software", "data") and e.host is None:
            yield "missing_host", f"{e.kind} must be hosted on a device"
        if e.kind not in ("software", "data") and e.host is not None:
            yield "invalid_attribute", f"{e.kind} cannot carry a host"
        if e.kind == "link":
            ends = e.link_endpoints
            if ends is None or len(ends) != 2 or ends[0] == ends[1]:
                yield "invalid_link", "link must connect two distinct devices"
        elif e.link_endpoints is not None:
            yield "invalid_attribute", f"{e.kind} cannot carry link endpoints"

    elif isinstance(e, CommEntity):
        if e.kind == "network":
            if e.range is None:
                yield "missing_range", "network must declare an address range"
            if e.device is not None:
                yield "invalid_attribute", "network cannot be bound to a device"
        else:
            if e.device is None:
                yield "missing_device", f"{e.kind} must name its hosting device"
            if e.range is not None:
                yield "invalid_attribute", f"{e.kind} cannot declare a range"
            if e.zone is not None:
                yield "invalid_attribute", f"{e.kind} zone is taken from its device"
        if e.address is not None:
            if e.kind != "endpoint":
                yield "invalid_attribute", "only endpoints carry an address"
            else:
                hits = [n.id for n in networks if n.range is not None and e.address in n.range]
                if not hits:
                    yield "address_outside_networks", f"{e.address} lies in no declared network"
                elif len(hits) > 1:
                    yield "address_ambiguous", f"{e.address} lies in networks {', '.join(hits)}"
        if e.enabler_class is not None and (e.kind != "enabler" or e.enabler_class not in ENABLER_CLASSES):
            yield "invalid_attribute", f"enabler class {e.enabler_class!r} not valid here"
        if e.kind == "inhibitor" and e.ruleset is None:
            yield "missing_ruleset", "inhibitor must carry a ruleset"
        if e.kind != "inhibitor" and (e.ruleset is not None or e.nat):
            yield "invalid_attribute", "only inhibitors carry rules or NAT mappings"
        if e.kind == "network" and e.routes:
            yield "invalid_attribute", "networks do not route"
        for i, rule in enumerate(e.ruleset or ()):
            if rule.action not in ("allow", "deny"):
                yield "invalid_rule", f"rule {i}: action {rule.action!r}"
            if rule.port is not None:
                lo, hi = rule.port
                if not (_port_ok(lo) and _port_ok(hi) and lo <= hi):
                    yield "invalid_rule", f"rule {i}: port range {lo}-{hi}"
        for m in e.nat:
            if m.direction not in NAT_DIRECTIONS:
                yield "invalid_nat", f"direction {m.direction!r}"
            if m.external == m.internal:
                yield "invalid_nat", f"mapping {m.external} onto itself"
        for name, port in e.services:
            if not TOKEN_PATTERN.match(name) or not _port_ok(port):
                yield "invalid_service_port", f"service ({name}, {port})"

    elif isinstance(e, ServiceEntity):
        if e.host is None:
            yield "missing_host", "service must name its host"
        if e.sla is not None:
            if not 0.0 <= e.sla.availability <= 1.0:
                yield "invalid_sla", f"availability {e.sla.availability} outside [0, 1]"
            if e.sla.responsiveness_ms < 0:
                yield "invalid_sla", f"responsiveness {e.sla.responsiveness_ms} is negative"

    elif isinstance(e, DataFlow):
        if e.source == e.target:
            yield "self_flow", "flow source and target are the same service"

    elif isinstance(e, Composition):
        if e.outer in e.inner:
            yield "self_composition", "service composed with itself"
        if not e.inner:
            yield "empty_composition", "composition names no inner services"

    elif isinstance(e, OrgEntity):
        wrong = {
            "roles": e.roles and e.kind != "person",
            "privileges": e.privileges and e.kind != "role",
            "steps": e.steps and e.kind != "process",
            "statement": e.statement is not None and e.kind != "policy",
            "enforced_by": e.enforced_by and e.kind != "policy",
            "governs": e.governs and e.kind != "policy",
        }
        for key in sorted(k for k, bad in wrong.items() if bad):
            yield "invalid_attribute", f"{e.kind} cannot carry {key}"
        privs = list(e.privileges) + [pv for st in e.steps for pv in st.delegated]
        for pv in privs:
            if pv.right not in RIGHTS:
                yield "invalid_privilege", f"unknown right {pv.right!r}"
        for ref in e.enforced_by:
            if ref.rule_index is not None:
                target = model.entities.get(ref.target)
                n = len(target.ruleset or ()) if isinstance(target, CommEntity) else 0
                if not 0 <= ref.rule_index < n:
                    yield "invalid_rule_reference", f"{ref.target} has no rule {ref.rule_index}"

    for fld, target, allowed in references(e):
        if target not in model.entities:
            yield "dangling_reference", f"{fld} -> {target} does not resolve"
        elif allowed is not None and _lk(model, target) not in allowed:
            got = "/".join(map(str, _lk(model, target)))
            yield "invalid_reference", f"{fld} -> {target} ({got}) has the wrong kind"

    for edge in implied_edges(e):
        if not model.has_edge(*edge.key):
            yield "missing_edge", f"implied edge {edge.kind}({edge.source} -> {edge.target}) absent"


def validate_model(model: ArchModel) -> list[Violation]:
    """Return all invariant violations sorted by (subject, code, message)."""
    out: list[Violation] = []
    networks = [e for e in model.entities.values() if isinstance(e, CommEntity) and e.kind == "network"]
    for eid in sorted(model.entities):
        for code, msg in _check_entity(model, model.entities[eid], networks):
            out.append(Violation(eid, code, msg))
    # a dangling reference is reported once, on its entity, not again on its edge
    implied = {e.key for ent in model.entities.values() for e in implied_edges(ent)}
    for edge in model.edges:
        label = f"{edge.kind}({edge.source} -> {edge.target})"
        if edge.kind not in EDGE_KINDS:
            out.append(Violation(edge.source, "invalid_edge_kind", label))
            continue
        missing = [x for x in (edge.source, edge.target) if x not in model.entities]
        if missing:
            if edge.key not in implied:
                out.append(Violation(edge.source, "dangling_edge", f"{label}: {', '.join(missing)} unknown"))
        elif edge.source == edge.target:
            out.append(Violation(edge.source, "self_edge", label))
        elif not edge_layers_ok(model, edge):
            out.append(Violation(edge.source, "edge_layer_mismatch", label))
        if edge.p is not None and not 0.0 <= edge.p <= 1.0:
            out.append(Violation(edge.source, "invalid_probability", f"{label}: p={edge.p}"))
    for name in sorted(model.viewpoint_specs):
        spec = model.viewpoint_specs[name]
        subject = f"viewpoint_{name}"
        if spec.name != name:
            out.append(Violation(subject, "viewpoint_name_mismatch", spec.name))
        for s in sorted(spec.seeds):
            if s not in model.entities:
                out.append(Violation(subject, "dangling_reference", f"seed {s} does not resolve"))
        for k in sorted(spec.expand):
            if k not in EDGE_KINDS:
                out.append(Violation(subject, "invalid_edge_kind", k))
        if spec.depth is not None and spec.depth < 0:
            out.append(Violation(subject, "invalid_depth", str(spec.depth)))
    out.sort()
    return out


# --------------------------------------------------------------------------
# traversal


def adjacency(model: ArchModel, kinds: Optional[Iterable[str]] = None) -> dict[str, set[str]]:
    """Undirected neighbour sets over edges of the given kinds (None = all)."""
    wanted = None if kinds is None else set(kinds)
    adj: dict[str, set[str]] = {}
    for e in model.edges:
        if wanted is not None and e.kind not in wanted:
            continue
        if e.source not in model.entities or e.target not in model.entities:
            continue
        adj.setdefault(e.source, set()).add(e.target)
        adj.setdefault(e.target, set()).add(e.source)
    return adj


def dependency_closure(
    model: ArchModel,
    seeds: Iterable[str],
    kinds: Optional[Iterable[str]] = None,
    depth: Optional[int] = None,
) -> set[str]:
    """Breadth-first closure over edges traversed in both directions.

    ``kinds=None`` follows every edge kind and ``depth=None`` is unlimited.
    """
    seeds = set(seeds)
    unknown = sorted(s for s in seeds if s not in model.entities)
    if unknown:
        raise UnknownEntityError(f"unknown seed(s): {', '.join(unknown)}")
    if depth is not None and depth < 0:
        raise ValueError("depth must be non-negative")
    adj = adjacency(model, kinds)
    seen = set(seeds)
    frontier = deque((s, 0) for s in sorted(seeds))
    while frontier:
        node, d = frontier.popleft()
        if depth is not None and d >= depth:
            continue
        for nb in sorted(adj.get(node, ())):
            if nb not in seen:
                seen.add(nb)
                frontier.append((nb, d + 1))
    return seen


def effective_zone(model: ArchModel, eid: str) -> Optional[str]:
    """Zone of an entity, inherited through hosts and devices where not declared."""
    seen: set[str] = set()
    cur: Optional[str] = eid
    while cur is not None and cur not in seen and cur in model.entities:
        seen.add(cur)
        e = model.entities[cur]
        if isinstance(e, AssetEntity):
            if e.zone is not None:
                return e.zone
            if e.kind == "link" and e.link_endpoints:
                zones = {effective_zone(model, d) for d in e.link_endpoints}
                return zones.pop() if len(zones) == 1 else None
            cur = e.host
        elif isinstance(e, CommEntity):
            if e.kind == "network":
                return e.zone
            cur = e.device
        elif isinstance(e, ServiceEntity):
            cur = e.host
        else:
            return None
    return None
