"""Viewpoints over the layered model and compromise propagation on them.

The pipeline is extract -> orient -> weight -> reduce to a polytree ->
propagate.  Propagation uses the independent-cause recurrence

    P(v) = 1 - prod over in-edges (u, v) of (1 - p_uv * P(u)),   P(seed) = 1

evaluated in topological order.  It is exact on polytrees: the parents of a
node never share an ancestor, so their compromise events are independent.
:func:`enumerate_compromise_oracle` computes the same quantity by brute force
for cross-checking.
"""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from . import kernels
from .errors import EmptyViewpointError, NotAPolytreeError, TooLargeError, UnknownEntityError
from .model import (
    ArchModel,
    CrossLayerEdge,
    Layer,
    ViewpointSpec,
    dependency_closure,
    effective_zone,
    layer_of_entity,
)

log = logging.getLogger(__name__)

# compromise travels from edge source to target ("forward"), the other way
# ("reverse"), or not at all ("ignore")
DEFAULT_DIRECTIONS: dict[str, str] = {
    "flows_to": "forward",
    "composed_with": "forward",
    "hosted_on": "reverse",
    "bound_to": "reverse",
    "operated_by": "reverse",
    "governed_by": "reverse",
    "enforced_by": "reverse",
    "depends_on": "reverse",
}
DEFAULT_PROBABILITY = 1.0
ORACLE_MAX_EDGES = 20


@dataclass(frozen=True)
class Viewpoint:
    spec: ViewpointSpec
    entities: frozenset[str]
    edges: tuple[CrossLayerEdge, ...]
    warnings: tuple[str, ...] = ()


def _matches(model: ArchModel, eid: str, spec: ViewpointSpec) -> bool:
    e = model.entities[eid]
    if spec.layers and layer_of_entity(e) not in spec.layers:
        return False
    if spec.kinds and e.kind not in spec.kinds:
        return False
    if spec.zones and effective_zone(model, eid) not in spec.zones:
        return False
    return True


def extract_viewpoint(model: ArchModel, spec: ViewpointSpec) -> Viewpoint:
    """Entities passing the selection predicates, narrowed to the dependency
    closure of the seeds when seeds are given; edges are the induced subgraph.

    An empty ``expand`` set follows every edge kind, like the other filters.
    """
    selected = {eid for eid in model.entities if _matches(model, eid, spec)}
    if spec.seeds:
        closure = dependency_closure(model, spec.seeds, spec.expand or None, spec.depth)
        selected &= closure
    edges = tuple(
        sorted(
            (e for e in model.edges if e.source in selected and e.target in selected),
            key=lambda e: e.key,
        )
    )
    warnings = ()
    if not selected:
        warnings = (f"viewpoint {spec.name!r} selects no entities",)
        log.warning(warnings[0])
    return Viewpoint(spec, frozenset(selected), edges, warnings)


def horizontal(name: str, layer: Layer) -> ViewpointSpec:
    return ViewpointSpec(name, layers=frozenset({layer}))


# --------------------------------------------------------------------------
# polytree structure


@dataclass(frozen=True)
class CycleWitness:
    """Two distinct undirected paths between ``start`` and ``end``."""

    start: str
    end: str
    first: tuple[str, ...]
    second: tuple[str, ...]
    first_edges: tuple[int, ...]
    second_edges: tuple[int, ...]


def _tree_path(adj: dict[str, list[tuple[str, int]]], a: str, b: str) -> tuple[list[str], list[int]]:
    prev: dict[str, tuple[Optional[str], Optional[int]]] = {a: (None, None)}
    stack = [a]
    while stack:
        u = stack.pop()
        if u == b:
            break
        for v, idx in adj.get(u, ()):
            if v not in prev:
                prev[v] = (u, idx)
                stack.append(v)
    nodes, idxs = [b], []
    while nodes[-1] != a:
        p, i = prev[nodes[-1]]
        nodes.append(p)
        idxs.append(i)
    return nodes[::-1], idxs[::-1]


def is_polytree(nodes: Iterable[str], edges: Iterable[tuple]) -> tuple[bool, Optional[CycleWitness]]:
    """Whether the underlying undirected graph is a forest.

    ``edges`` are ``(source, target, ...)`` tuples; extra fields are ignored.
    When the answer is no, a :class:`CycleWitness` is returned alongside.
    """
    parent: dict[str, str] = {n: n for n in nodes}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    adj: dict[str, list[tuple[str, int]]] = {}
    for idx, e in enumerate(edges):
        u, v, *_ = e
        parent.setdefault(u, u)
        parent.setdefault(v, v)
        if u == v:
            return False, CycleWitness(u, u, (u,), (u, u), (), (idx,))
        ru, rv = find(u), find(v)
        if ru == rv:
            first, first_idx = _tree_path(adj, u, v)
            return False, CycleWitness(u, v, tuple(first), (u, v), tuple(first_idx), (idx,))
        parent[ru] = rv
        adj.setdefault(u, []).append((v, idx))
        adj.setdefault(v, []).append((u, idx))
    return True, None


# --------------------------------------------------------------------------
# compromise graphs


@dataclass(frozen=True, order=True)
class CompromiseEdge:
    source: str
    target: str
    p: float
    kind: str = "depends_on"

    def __iter__(self):
        return iter((self.source, self.target, self.p))


@dataclass(frozen=True)
class DroppedEdge:
    edge: CompromiseEdge
    reason: str

    def __str__(self) -> str:
        e = self.edge
        return f"dropped {e.kind}({e.source} -> {e.target}) p={e.p}: {self.reason}"


@dataclass
class CompromiseGraph:
    nodes: tuple[str, ...]
    edges: list[CompromiseEdge]
    warnings: list[DroppedEdge] = field(default_factory=list)

    @classmethod
    def from_edges(cls, nodes: Iterable[str], edges: Iterable[tuple]) -> "CompromiseGraph":
        """Build from ``(source, target, p)`` triples (a kind may follow)."""
        es = [CompromiseEdge(*e) for e in edges]
        names = set(nodes) | {e.source for e in es} | {e.target for e in es}
        return cls(tuple(sorted(names)), es)


def _on_cycle(adj: dict[str, dict[int, str]], idx: int, u: str, v: str) -> bool:
    """True when u and v stay connected without edge ``idx``."""
    seen = {u}
    stack = [u]
    while stack:
        x = stack.pop()
        for j, y in adj[x].items():
            if j == idx or y in seen:
                continue
            if y == v:
                return True
            seen.add(y)
            stack.append(y)
    return False


def reduce_to_polytree(edges: list[CompromiseEdge]) -> tuple[list[CompromiseEdge], list[CompromiseEdge]]:
    """Repeatedly drop the minimum-probability edge lying on an undirected cycle.

    Ties go to the lexicographically smallest ``(source, target, kind)``.  An
    edge that is on no cycle never joins one after deletions, so one pass in
    ascending order is equivalent to re-scanning after every drop.
    """
    order = sorted(range(len(edges)), key=lambda i: (edges[i].p, edges[i].source, edges[i].target, edges[i].kind))
    adj: dict[str, dict[int, str]] = {}
    for i, e in enumerate(edges):
        adj.setdefault(e.source, {})[i] = e.target
        adj.setdefault(e.target, {})[i] = e.source
    dropped: set[int] = set()
    for i in order:
        e = edges[i]
        if e.source == e.target or _on_cycle(adj, i, e.source, e.target):
            dropped.add(i)
            del adj[e.source][i]
            adj[e.target].pop(i, None)
    kept = [e for i, e in enumerate(edges) if i not in dropped]
    gone = [edges[i] for i in order if i in dropped]
    return kept, gone


def build_compromise_graph(
    viewpoint: Viewpoint,
    direction: Optional[Mapping[str, str]] = None,
    probs: Optional[Mapping[tuple[str, str, str], float]] = None,
    default: float = DEFAULT_PROBABILITY,
    kind_defaults: Optional[Mapping[str, float]] = None,
) -> CompromiseGraph:
    """Orient and weight a viewpoint's edges, then reduce them to a polytree.

    Edge probability precedence: ``probs[(kind, source, target)]``, the
    edge's own ``p``, ``kind_defaults[kind]``, then ``default``.
    """
    if not viewpoint.entities:
        raise EmptyViewpointError(f"viewpoint {viewpoint.spec.name!r} is empty")
    dirs = dict(DEFAULT_DIRECTIONS)
    dirs.update(direction or {})
    probs = probs or {}
    kind_defaults = kind_defaults or {}
    oriented = []
    for e in viewpoint.edges:
        how = dirs.get(e.kind, "ignore")
        if how == "ignore":
            continue
        if how not in ("forward", "reverse"):
            raise ValueError(f"unknown direction {how!r} for {e.kind}")
        p = probs.get(e.key)
        if p is None:
            p = e.p if e.p is not None else kind_defaults.get(e.kind, default)
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"probability {p} outside [0, 1] on {e.kind}({e.source} -> {e.target})")
        src, dst = (e.source, e.target) if how == "forward" else (e.target, e.source)
        oriented.append(CompromiseEdge(src, dst, float(p), e.kind))
    oriented.sort()
    kept, gone = reduce_to_polytree(oriented)
    warnings = [DroppedEdge(e, "closes an undirected cycle") for e in gone]
    for w in warnings:
        log.warning(str(w))
    return CompromiseGraph(tuple(sorted(viewpoint.entities)), kept, warnings)


@dataclass(frozen=True)
class CompromiseResult:
    probabilities: dict[str, float]

    def to_text(self) -> str:
        return "".join(f"{n} {self.probabilities[n]:.6f}\n" for n in sorted(self.probabilities))


def _check_seeds(graph: CompromiseGraph, seeds: Iterable[str]) -> set[str]:
    seeds = set(seeds)
    unknown = sorted(seeds - set(graph.nodes))
    if unknown:
        raise UnknownEntityError(f"unknown seed(s): {', '.join(unknown)}")
    return seeds


def propagate_compromise(graph: CompromiseGraph, seeds: Iterable[str]) -> CompromiseResult:
    ok, witness = is_polytree(graph.nodes, graph.edges)
    if not ok:
        raise NotAPolytreeError(witness)
    seeds = _check_seeds(graph, seeds)
    incoming: dict[str, list[CompromiseEdge]] = {n: [] for n in graph.nodes}
    outgoing: dict[str, list[str]] = {n: [] for n in graph.nodes}
    indeg = {n: 0 for n in graph.nodes}
    for e in graph.edges:
        incoming[e.target].append(e)
        outgoing[e.source].append(e.target)
        indeg[e.target] += 1
    ready = [n for n in graph.nodes if indeg[n] == 0]
    heapq.heapify(ready)
    prob: dict[str, float] = {}
    while ready:
        v = heapq.heappop(ready)
        if v in seeds:
            prob[v] = 1.0
        else:
            # q + x - q*x is 1 - (1 - q)(1 - x) without the round trip
            # through the complement, so a lone parent gives p * P(u) exactly
            q = 0.0
            for e in incoming[v]:
                x = e.p * prob[e.source]
                q = q + x - q * x
            prob[v] = q
        for w in outgoing[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                heapq.heappush(ready, w)
    return CompromiseResult(prob)


def enumerate_compromise_oracle(graph: CompromiseGraph, seeds: Iterable[str]) -> CompromiseResult:
    """Exact reach probability by summing over every edge-activation subset."""
    if len(graph.edges) > ORACLE_MAX_EDGES:
        raise TooLargeError(f"{len(graph.edges)} edges; enumeration is limited to {ORACLE_MAX_EDGES}")
    seeds = _check_seeds(graph, seeds)
    touched = sorted({e.source for e in graph.edges} | {e.target for e in graph.edges})
    index = {n: i for i, n in enumerate(touched)}
    mass = kernels.reach_mass(
        len(touched),
        [index[e.source] for e in graph.edges],
        [index[e.target] for e in graph.edges],
        [e.p for e in graph.edges],
        [n in seeds for n in touched],
    )
    out = {n: (1.0 if n in seeds else 0.0) for n in graph.nodes}
    for n, i in index.items():
        out[n] = 1.0 if n in seeds else min(1.0, max(0.0, mass[i]))
    return CompromiseResult(out)
