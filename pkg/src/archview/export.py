"""Graph rendering of models and viewpoints as DOT or JSON text."""

from __future__ import annotations

import json
from typing import Optional

from .adl import model_to_dict
from .errors import InvalidFormatError
from .model import LAYER_ORDER, ArchModel
from .viewpoints import Viewpoint

FORMATS = ("dot", "json")

EDGE_STYLES = {
    "hosted_on": 'style=solid color="black"',
    "bound_to": 'style=dashed color="gray40"',
    "flows_to": 'style=bold color="blue"',
    "composed_with": 'style=dotted color="darkgreen"',
    "operated_by": 'style=dashed color="purple"',
    "governed_by": 'style=dotted color="orange"',
    "enforced_by": 'style=bold color="red"',
    "depends_on": 'style=solid color="gray60"',
}


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'


def _selection(model: ArchModel, viewpoint: Optional[Viewpoint]):
    if viewpoint is None:
        return set(model.entities), sorted(model.edges, key=lambda e: e.key)
    return set(viewpoint.entities), sorted(viewpoint.edges, key=lambda e: e.key)


def _to_dot(model: ArchModel, viewpoint: Optional[Viewpoint]) -> str:
    ids, edges = _selection(model, viewpoint)
    name = viewpoint.spec.name if viewpoint is not None else model.name
    out = [f"digraph {_quote(name)} {{", "  rankdir=TB;", "  node [shape=box];"]
    for layer in LAYER_ORDER:
        members = sorted(i for i in model.ids(layer) if i in ids)
        if viewpoint is not None and not members:
            continue
        out.append(f"  subgraph cluster_{layer.value} {{")
        out.append(f"    label={_quote(layer.value)};")
        for eid in members:
            label = f"{eid}\n{model.entities[eid].kind}"
            out.append(f"    {_quote(eid)} [label={_quote(label)}];")
        out.append("  }")
    for e in edges:
        attrs = f"label={_quote(e.kind)} {EDGE_STYLES.get(e.kind, '')}".rstrip()
        if e.p is not None:
            attrs += f" penwidth={1 + 2 * e.p:.2f}"
        out.append(f"  {_quote(e.source)} -> {_quote(e.target)} [{attrs}];")
    out.append("}")
    return "\n".join(out) + "\n"


def _to_json(model: ArchModel, viewpoint: Optional[Viewpoint]) -> str:
    data = model_to_dict(model)
    if viewpoint is not None:
        ids, edges = _selection(model, viewpoint)
        data = {
            "name": viewpoint.spec.name,
            "layers": {
                layer: [ent for ent in ents if ent["id"] in ids] for layer, ents in data["layers"].items()
            },
            "edges": [
                {"kind": e.kind, "source": e.source, "target": e.target, **({"p": e.p} if e.p is not None else {})}
                for e in edges
            ],
        }
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def export_graph(model: ArchModel, format: str = "dot", viewpoint: Optional[Viewpoint] = None) -> str:
    """Render the whole model, or one of its viewpoints, in ``format``.

    Full-model DOT output always carries four layer clusters, empty or not.
    """
    if format == "dot":
        return _to_dot(model, viewpoint)
    if format == "json":
        return _to_json(model, viewpoint)
    raise InvalidFormatError(f"unknown format {format!r}; expected one of {', '.join(FORMATS)}")
