"""Architecture description language (``.salv``) reader and writer.

The format is small and line-oriented::

    model "substation"

    layer asset {
      device plc1 { kind: plc; zone: field; }
      software fw_image { host: plc1; }
    }

    layer communication {
      network field_net { range: 10.0.3.0/24; zone: field; }
      endpoint plc1_ep { device: plc1; address: 10.0.3.5; services: [(modbus, 502)]; }
      inhibitor fw1 { device: fw_dev; rules: [(deny, any, any, any, any)]; }
    }

    edges {
      hosted_on fw_image -> plc1 { p: 0.5; }
    }

    viewpoint field_view { zones: [field]; }

Reference keys (``host``, ``device``, ``from``/``to``, ``composed_of``,
``roles``, ``enforced_by`` ...) become cross-layer edges automatically; the
``edges`` block only carries extra edges and per-edge compromise
probabilities (``p``).
"""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass
from ipaddress import IPv4Address, IPv4Network
from typing import Any, Callable, Iterable, Optional

from .errors import InvalidModelError, ParseError
from .model import (
    EDGE_KINDS,
    ID_PATTERN,
    LAYER_ORDER,
    SLA,
    ArchModel,
    AssetEntity,
    CommEntity,
    Composition,
    CrossLayerEdge,
    DataFlow,
    EnforcementRef,
    Entity,
    FirewallRule,
    Layer,
    NatMapping,
    OrgEntity,
    Privilege,
    ProcessStep,
    Route,
    ServiceEntity,
    ViewpointSpec,
    implied_edges,
    materialize_edges,
    validate_model,
)


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    line: int
    column: int
    message: str

    def __str__(self) -> str:
        return f"{self.line}:{self.column}: {self.severity}: {self.message}"


# --------------------------------------------------------------------------
# lexer

_WORD = re.compile(r"[A-Za-z0-9_](?:[A-Za-z0-9_./]|-(?!>))*")
_PUNCT = {"{", "}", "[", "]", "(", ")", ":", ";", ","}

_RE_ADDR = re.compile(r"^\d{1,3}(?:\.\d{1,3}){3}$")
_RE_RANGE = re.compile(r"^\d{1,3}(?:\.\d{1,3}){3}/\d{1,2}$")
_RE_INT = re.compile(r"^\d+$")
_RE_FLOAT = re.compile(r"^\d+\.\d+(?:[eE][-+]?\d+)?$|^\d+[eE][-+]?\d+$")
_RE_PORTS = re.compile(r"^\d+-\d+$")


@dataclass
class _Tok:
    type: str  # word, string, punct, arrow, eof
    text: str
    line: int
    col: int


class _SyntaxFailure(Exception):
    def __init__(self, line: int, col: int, message: str):
        self.diag = Diagnostic("error", line, col, message)


def _lex(src: str) -> list[_Tok]:
    toks: list[_Tok] = []
    i, line, col = 0, 1, 1
    n = len(src)
    while i < n:
        c = src[i]
        if c == "\n":
            i, line, col = i + 1, line + 1, 1
        elif c in " \t\r":
            i, col = i + 1, col + 1
        elif c == "#":
            while i < n and src[i] != "\n":
                i, col = i + 1, col + 1
        elif c == '"':
            start_line, start_col = line, col
            buf = []
            i, col = i + 1, col + 1
            while True:
                if i >= n or src[i] == "\n":
                    raise _SyntaxFailure(start_line, start_col, "unterminated string")
                ch = src[i]
                if ch == "\\" and i + 1 < n and src[i + 1] in '"\\nt':
                    buf.append({"n": "\n", "t": "\t"}.get(src[i + 1], src[i + 1]))
                    i, col = i + 2, col + 2
                elif ch == '"':
                    i, col = i + 1, col + 1
                    break
                else:
                    buf.append(ch)
                    i, col = i + 1, col + 1
            toks.append(_Tok("string", "".join(buf), start_line, start_col))
        elif src.startswith("->", i):
            toks.append(_Tok("arrow", "->", line, col))
            i, col = i + 2, col + 2
        elif c in _PUNCT:
            toks.append(_Tok("punct", c, line, col))
            i, col = i + 1, col + 1
        else:
            m = _WORD.match(src, i)
            if not m:
                raise _SyntaxFailure(line, col, f"unexpected character {c!r}")
            toks.append(_Tok("word", m.group(), line, col))
            col += m.end() - i
            i = m.end()
    toks.append(_Tok("eof", "", line, col))
    return toks


# --------------------------------------------------------------------------
# raw syntax tree


@dataclass
class _Value:
    type: str  # ident, string, int, float, address, range, ports, list, tuple, invalid
    data: Any
    line: int
    col: int


@dataclass
class _Prop:
    key: str
    value: _Value
    line: int
    col: int


@dataclass
class _Decl:
    kind: str
    ident: str
    props: list[_Prop]
    line: int
    col: int
    id_line: int
    id_col: int


@dataclass
class _EdgeStmt:
    kind: str
    source: str
    target: str
    props: list[_Prop]
    line: int
    col: int


class _Parser:
    def __init__(self, toks: list[_Tok]):
        self.toks = toks
        self.pos = 0
        self.errors: list[Diagnostic] = []

    def peek(self) -> _Tok:
        return self.toks[self.pos]

    def next(self) -> _Tok:
        t = self.toks[self.pos]
        if t.type != "eof":
            self.pos += 1
        return t

    def fail(self, tok: _Tok, message: str) -> None:
        raise _SyntaxFailure(tok.line, tok.col, message)

    def expect_punct(self, ch: str, opener: Optional[_Tok] = None) -> _Tok:
        t = self.next()
        if t.type == "punct" and t.text == ch:
            return t
        if t.type == "eof" and opener is not None:
            self.fail(opener, f"unclosed '{opener.text}'")
        self.fail(t, f"expected '{ch}', found {_describe(t)}")

    def expect_word(self, what: str) -> _Tok:
        t = self.next()
        if t.type != "word":
            self.fail(t, f"expected {what}, found {_describe(t)}")
        return t

    def parse(self):
        head = self.next()
        if head.type != "word" or head.text != "model":
            self.fail(head, "expected 'model'")
        name_tok = self.next()
        if name_tok.type != "string":
            self.fail(name_tok, "expected model name string")
        layers: list[tuple[_Tok, list[_Decl]]] = []
        edges: list[_EdgeStmt] = []
        viewpoints: list[_Decl] = []
        while True:
            t = self.peek()
            if t.type == "eof":
                break
            if t.type != "word":
                self.fail(t, f"unexpected {_describe(t)}")
            if t.text == "layer":
                self.next()
                layer_tok = self.expect_word("layer name")
                layers.append((layer_tok, self.decl_block()))
            elif t.text == "edges":
                self.next()
                edges.extend(self.edge_block())
            elif t.text == "viewpoint":
                self.next()
                name = self.expect_word("viewpoint name")
                opener = self.expect_punct("{")
                props = self.props(opener)
                viewpoints.append(_Decl("viewpoint", name.text, props, t.line, t.col, name.line, name.col))
            else:
                self.fail(t, f"unknown keyword '{t.text}'")
        return name_tok.text, layers, edges, viewpoints

    def decl_block(self) -> list[_Decl]:
        opener = self.expect_punct("{")
        decls = []
        while True:
            t = self.peek()
            if t.type == "punct" and t.text == "}":
                self.next()
                return decls
            if t.type == "eof":
                self.fail(opener, "unclosed '{'")
            kind = self.expect_word("declaration kind")
            ident = self.expect_word("identifier")
            body = self.expect_punct("{")
            props = self.props(body)
            decls.append(_Decl(kind.text, ident.text, props, kind.line, kind.col, ident.line, ident.col))

    def edge_block(self) -> list[_EdgeStmt]:
        opener = self.expect_punct("{")
        stmts = []
        while True:
            t = self.peek()
            if t.type == "punct" and t.text == "}":
                self.next()
                return stmts
            if t.type == "eof":
                self.fail(opener, "unclosed '{'")
            kind = self.expect_word("edge kind")
            src = self.expect_word("edge source")
            arrow = self.next()
            if arrow.type != "arrow":
                self.fail(arrow, f"expected '->', found {_describe(arrow)}")
            dst = self.expect_word("edge target")
            t = self.next()
            props: list[_Prop] = []
            if t.type == "punct" and t.text == "{":
                props = self.props(t)
                nxt = self.peek()
                if nxt.type == "punct" and nxt.text == ";":
                    self.next()
            elif not (t.type == "punct" and t.text == ";"):
                self.fail(t, f"expected ';' or '{{', found {_describe(t)}")
            stmts.append(_EdgeStmt(kind.text, src.text, dst.text, props, kind.line, kind.col))

    def props(self, opener: _Tok) -> list[_Prop]:
        props = []
        while True:
            t = self.peek()
            if t.type == "punct" and t.text == "}":
                self.next()
                return props
            if t.type == "eof":
                self.fail(opener, f"unclosed '{opener.text}'")
            key = self.expect_word("key")
            self.expect_punct(":")
            value = self.value(opener)
            props.append(_Prop(key.text, value, key.line, key.col))
            t = self.peek()
            if t.type == "punct" and t.text == ";":
                self.next()
            elif not (t.type == "punct" and t.text == "}"):
                if t.type == "eof":
                    self.fail(opener, f"unclosed '{opener.text}'")
                self.fail(t, f"expected ';', found {_describe(t)}")

    def value(self, outer: _Tok) -> _Value:
        t = self.next()
        if t.type == "string":
            return _Value("string", t.text, t.line, t.col)
        if t.type == "word":
            return self.classify(t)
        if t.type == "punct" and t.text in "[(":
            close = "]" if t.text == "[" else ")"
            items = []
            nxt = self.peek()
            if close == "]" and nxt.type == "punct" and nxt.text == "]":
                self.next()
                return _Value("list", [], t.line, t.col)
            while True:
                items.append(self.value(t))
                sep = self.next()
                if sep.type == "punct" and sep.text == ",":
                    continue
                if sep.type == "punct" and sep.text == close:
                    break
                if sep.type == "eof":
                    self.fail(t, f"unclosed '{t.text}'")
                self.fail(sep, f"expected ',' or '{close}', found {_describe(sep)}")
            return _Value("list" if close == "]" else "tuple", items, t.line, t.col)
        if t.type == "eof":
            self.fail(outer, f"unclosed '{outer.text}'")
        self.fail(t, f"expected a value, found {_describe(t)}")

    def classify(self, t: _Tok) -> _Value:
        w = t.text
        try:
            if _RE_ADDR.match(w):
                return _Value("address", IPv4Address(w), t.line, t.col)
            if _RE_RANGE.match(w):
                return _Value("range", IPv4Network(w), t.line, t.col)
        except ValueError:
            kind = "range" if "/" in w else "address"
            return self._invalid(t, f"malformed {kind} '{w}'")
        if _RE_INT.match(w):
            return _Value("int", int(w), t.line, t.col)
        if _RE_FLOAT.match(w):
            return _Value("float", float(w), t.line, t.col)
        if _RE_PORTS.match(w):
            lo, hi = (int(x) for x in w.split("-"))
            return _Value("ports", (lo, hi), t.line, t.col)
        if ID_PATTERN.match(w):
            return _Value("ident", w, t.line, t.col)
        return self._invalid(t, f"malformed token '{w}'")

    def _invalid(self, t: _Tok, message: str) -> _Value:
        self.errors.append(Diagnostic("error", t.line, t.col, message))
        return _Value("invalid", t.text, t.line, t.col)


def _describe(t: _Tok) -> str:
    if t.type == "eof":
        return "end of input"
    if t.type == "string":
        return "string"
    return f"'{t.text}'"


# --------------------------------------------------------------------------
# value converters


class _BadValue(Exception):
    pass


def _ident(v: _Value) -> str:
    if v.type != "ident":
        raise _BadValue(f"expected identifier, got {v.type}")
    return v.data


def _text(v: _Value) -> str:
    if v.type not in ("string", "ident"):
        raise _BadValue(f"expected string, got {v.type}")
    return v.data


def _string(v: _Value) -> str:
    if v.type != "string":
        raise _BadValue(f"expected string, got {v.type}")
    return v.data


def _integer(v: _Value) -> int:
    if v.type != "int":
        raise _BadValue(f"expected integer, got {v.type}")
    return v.data


def _number(v: _Value) -> float:
    if v.type not in ("int", "float"):
        raise _BadValue(f"expected number, got {v.type}")
    return float(v.data)


def _boolean(v: _Value) -> bool:
    if v.type == "ident" and v.data in ("true", "false"):
        return v.data == "true"
    raise _BadValue("expected true or false")


def _address(v: _Value) -> IPv4Address:
    if v.type != "address":
        raise _BadValue(f"expected dotted-quad address, got {v.type}")
    return v.data


def _range(v: _Value) -> IPv4Network:
    if v.type != "range":
        raise _BadValue(f"expected address range, got {v.type}")
    return v.data


def _net_or_any(v: _Value) -> Optional[IPv4Network]:
    if v.type == "ident" and v.data == "any":
        return None
    if v.type == "address":
        return IPv4Network(f"{v.data}/32")
    if v.type == "range":
        return v.data
    raise _BadValue("expected range, address or 'any'")


def _proto_or_any(v: _Value) -> Optional[str]:
    p = _ident(v)
    return None if p == "any" else p


def _port_or_any(v: _Value) -> Optional[tuple[int, int]]:
    if v.type == "ident" and v.data == "any":
        return None
    if v.type == "int":
        return (v.data, v.data)
    if v.type == "ports":
        return v.data
    raise _BadValue("expected port, port range or 'any'")


def _port(v: _Value) -> int:
    p = _integer(v)
    if p > 65535:
        raise _BadValue(f"port {p} outside 0-65535")
    return p


def _depth(v: _Value) -> Optional[int]:
    if v.type == "ident" and v.data == "unlimited":
        return None
    return _integer(v)


def _list_of(conv: Callable[[_Value], Any]) -> Callable[[_Value], tuple]:
    def convert(v: _Value) -> tuple:
        if v.type != "list":
            raise _BadValue(f"expected list, got {v.type}")
        return tuple(conv(x) for x in v.data)

    return convert


def _tuple_args(v: _Value, *arities: int) -> list[_Value]:
    if v.type != "tuple" or len(v.data) not in arities:
        want = " or ".join(str(a) for a in arities)
        raise _BadValue(f"expected a {want}-tuple")
    return v.data


def _rule(v: _Value) -> FirewallRule:
    action, src, dst, proto, port = _tuple_args(v, 5)
    act = _ident(action)
    if act not in ("allow", "deny"):
        raise _BadValue(f"rule action must be allow or deny, got {act!r}")
    port_range = _port_or_any(port)
    if port_range is not None and not (port_range[0] <= port_range[1] <= 65535):
        raise _BadValue(f"bad port range {port_range[0]}-{port_range[1]}")
    return FirewallRule(act, _net_or_any(src), _net_or_any(dst), _proto_or_any(proto), port_range)


def _nat(v: _Value) -> NatMapping:
    direction, external, internal = _tuple_args(v, 3)
    d = _ident(direction)
    if d not in ("dst_rewrite", "src_rewrite"):
        raise _BadValue(f"NAT direction must be dst_rewrite or src_rewrite, got {d!r}")
    return NatMapping(_address(external), _address(internal), d)


def _route(v: _Value) -> Route:
    dest, hop = _tuple_args(v, 2)
    return Route(_range(dest), _ident(hop))


def _service_port(v: _Value) -> tuple[str, int]:
    name, port = _tuple_args(v, 2)
    return (_ident(name), _port(port))


def _privilege(v: _Value) -> Privilege:
    right, target = _tuple_args(v, 2)
    return Privilege(_ident(right), _ident(target))


def _step(v: _Value) -> ProcessStep:
    args = _tuple_args(v, 2, 3)
    delegated = _list_of(_privilege)(args[2]) if len(args) == 3 else ()
    return ProcessStep(_text(args[0]), _ident(args[1]), delegated)


def _enforcement(v: _Value) -> EnforcementRef:
    if v.type == "tuple":
        target, idx = _tuple_args(v, 2)
        return EnforcementRef(_ident(target), _integer(idx))
    return EnforcementRef(_ident(v))


def _sla(v: _Value) -> SLA:
    avail, resp = _tuple_args(v, 2)
    return SLA(_number(avail), _number(resp))


def _pair(v: _Value) -> tuple[str, str]:
    items = _list_of(_ident)(v)
    if len(items) != 2:
        raise _BadValue("expected exactly two devices")
    return items


def _layers(v: _Value) -> frozenset:
    names = _list_of(_ident)(v)
    try:
        return frozenset(Layer(n) for n in names)
    except ValueError as exc:
        raise _BadValue(str(exc)) from None


def _edge_kinds(v: _Value) -> frozenset:
    kinds = _list_of(_ident)(v)
    for k in kinds:
        if k not in EDGE_KINDS:
            raise _BadValue(f"unknown edge kind {k!r}")
    return frozenset(kinds)


def _probability(v: _Value) -> float:
    p = _number(v)
    if not 0.0 <= p <= 1.0:
        raise _BadValue(f"probability {p} outside [0, 1]")
    return p


# per declaration kind: ADL key -> (dataclass attribute, converter)
_SCHEMAS: dict[tuple[Layer, str], dict[str, tuple[str, Callable]]] = {
    (Layer.ASSET, "device"): {"kind": ("device_class", _ident), "zone": ("zone", _ident)},
    (Layer.ASSET, "link"): {
        "endpoints": ("link_endpoints", _pair), "medium": ("medium", _ident), "zone": ("zone", _ident),
    },
    (Layer.ASSET, "software"): {"host": ("host", _ident), "zone": ("zone", _ident)},
    (Layer.ASSET, "data"): {"host": ("host", _ident), "zone": ("zone", _ident)},
    (Layer.COMMUNICATION, "endpoint"): {
        "device": ("device", _ident), "address": ("address", _address),
        "routes": ("routes", _list_of(_route)), "services": ("services", _list_of(_service_port)),
    },
    (Layer.COMMUNICATION, "enabler"): {
        "device": ("device", _ident), "kind": ("enabler_class", _ident),
        "routes": ("routes", _list_of(_route)), "services": ("services", _list_of(_service_port)),
    },
    (Layer.COMMUNICATION, "inhibitor"): {
        "device": ("device", _ident), "rules": ("ruleset", _list_of(_rule)),
        "nat": ("nat", _list_of(_nat)), "routes": ("routes", _list_of(_route)),
        "services": ("services", _list_of(_service_port)),
    },
    (Layer.COMMUNICATION, "network"): {"range": ("range", _range), "zone": ("zone", _ident)},
    (Layer.SERVICE, "service"): {
        "host": ("host", _ident), "description": ("description", _string),
        "operations": ("operations", _list_of(_ident)), "endpoint": ("endpoint_ref", _ident),
        "protocol": ("protocol", _ident), "schema": ("schema", _text),
        "fault_policy": ("fault_policy", _string), "sla": ("sla", _sla),
        "requires_auth": ("requires_auth", _boolean), "auth": ("auth", _boolean),
        "vulnerable": ("vulnerable", _boolean), "note": ("vulnerability_note", _string),
    },
    (Layer.SERVICE, "flow"): {
        "from": ("source", _ident), "to": ("target", _ident),
        "protocol": ("protocol", _ident), "payload": ("payload", _text),
    },
    (Layer.SERVICE, "composition"): {"outer": ("outer", _ident), "composed_of": ("inner", _list_of(_ident))},
    (Layer.ORGANIZATION, "person"): {"roles": ("roles", _list_of(_ident))},
    (Layer.ORGANIZATION, "role"): {"privileges": ("privileges", _list_of(_privilege))},
    (Layer.ORGANIZATION, "process"): {"steps": ("steps", _list_of(_step))},
    (Layer.ORGANIZATION, "policy"): {
        "statement": ("statement", _string), "enforced_by": ("enforced_by", _list_of(_enforcement)),
        "governs": ("governs", _list_of(_ident)),
    },
}

_REQUIRED = {
    (Layer.SERVICE, "flow"): ("from", "to"),
    (Layer.SERVICE, "composition"): ("outer",),
}

_VIEWPOINT_SCHEMA = {
    "layers": ("layers", _layers),
    "zones": ("zones", lambda v: frozenset(_list_of(_ident)(v))),
    "kinds": ("kinds", lambda v: frozenset(_list_of(_ident)(v))),
    "seeds": ("seeds", lambda v: frozenset(_list_of(_ident)(v))),
    "expand": ("expand", _edge_kinds),
    "depth": ("depth", _depth),
}


def _construct(layer: Layer, kind: str, eid: str, attrs: dict) -> Entity:
    if layer is Layer.ASSET:
        return AssetEntity(eid, kind, **attrs)
    if layer is Layer.COMMUNICATION:
        return CommEntity(eid, kind, **attrs)
    if layer is Layer.ORGANIZATION:
        return OrgEntity(eid, kind, **attrs)
    if kind == "service":
        return ServiceEntity(eid, **attrs)
    if kind == "flow":
        return DataFlow(eid, **attrs)
    return Composition(eid, **attrs)


def _convert_props(props: list[_Prop], schema: dict, what: str, errors: list[Diagnostic]) -> dict:
    attrs: dict = {}
    seen: set[str] = set()
    for prop in props:
        if prop.key in seen:
            errors.append(Diagnostic("error", prop.line, prop.col, f"duplicate key '{prop.key}' in {what}"))
            continue
        seen.add(prop.key)
        if prop.key not in schema:
            errors.append(Diagnostic("error", prop.line, prop.col, f"unknown key '{prop.key}' for {what}"))
            continue
        attr, conv = schema[prop.key]
        if prop.value.type == "invalid":
            continue
        try:
            attrs[attr] = conv(prop.value)
        except _BadValue as exc:
            errors.append(Diagnostic("error", prop.value.line, prop.value.col, f"{prop.key}: {exc}"))
    return attrs


def _build(name: str, layers, edge_stmts, viewpoints, errors: list[Diagnostic]) -> ArchModel:
    model = ArchModel(name)
    for layer_tok, decls in layers:
        try:
            layer = Layer(layer_tok.text)
        except ValueError:
            errors.append(Diagnostic("error", layer_tok.line, layer_tok.col, f"unknown layer '{layer_tok.text}'"))
            continue
        for d in decls:
            schema = _SCHEMAS.get((layer, d.kind))
            if schema is None:
                errors.append(Diagnostic("error", d.line, d.col, f"unknown keyword '{d.kind}' in layer {layer}"))
                continue
            if not ID_PATTERN.match(d.ident):
                errors.append(Diagnostic("error", d.id_line, d.id_col, f"invalid identifier '{d.ident}'"))
                continue
            attrs = _convert_props(d.props, schema, f"{d.kind} {d.ident}", errors)
            missing = [k for k in _REQUIRED.get((layer, d.kind), ()) if schema[k][0] not in attrs]
            if missing:
                errors.append(Diagnostic("error", d.line, d.col, f"{d.kind} {d.ident} lacks {', '.join(missing)}"))
                continue
            if d.ident in model.entities:
                errors.append(Diagnostic("error", d.id_line, d.id_col, f"duplicate id '{d.ident}'"))
                continue
            model.add_entity(layer, _construct(layer, d.kind, d.ident, attrs))

    materialize_edges(model)
    explicit: set[tuple[str, str, str]] = set()
    for st in edge_stmts:
        if st.kind not in EDGE_KINDS:
            errors.append(Diagnostic("error", st.line, st.col, f"unknown edge kind '{st.kind}'"))
            continue
        key = (st.kind, st.source, st.target)
        if key in explicit:
            errors.append(Diagnostic("error", st.line, st.col, f"duplicate edge {st.kind} {st.source} -> {st.target}"))
            continue
        explicit.add(key)
        attrs = _convert_props(st.props, {"p": ("p", _probability)}, f"edge {st.kind}", errors)
        edge = CrossLayerEdge(st.kind, st.source, st.target, attrs.get("p"))
        if model.has_edge(*key):
            model.replace_edge(edge)
        else:
            model.add_edge(edge)

    for vp in viewpoints:
        if not ID_PATTERN.match(vp.ident):
            errors.append(Diagnostic("error", vp.id_line, vp.id_col, f"invalid identifier '{vp.ident}'"))
            continue
        if vp.ident in model.viewpoint_specs:
            errors.append(Diagnostic("error", vp.id_line, vp.id_col, f"duplicate viewpoint '{vp.ident}'"))
            continue
        attrs = _convert_props(vp.props, _VIEWPOINT_SCHEMA, f"viewpoint {vp.ident}", errors)
        model.viewpoint_specs[vp.ident] = ViewpointSpec(vp.ident, **attrs)
    return model


def parse_model(source: str) -> ArchModel:
    """Parse ADL text.  Raises :class:`ParseError` carrying every error Diagnostic."""
    try:
        toks = _lex(source)
        parser = _Parser(toks)
        parsed = parser.parse()
    except _SyntaxFailure as exc:
        raise ParseError([exc.diag]) from None
    errors = list(parser.errors)
    model = _build(*parsed, errors)
    if errors:
        errors.sort(key=lambda d: (d.line, d.column, d.message))
        raise ParseError(errors)
    return model


def check_source(source: str) -> list[Diagnostic]:
    try:
        parse_model(source)
    except ParseError as exc:
        return exc.diagnostics
    return []


def load_model(path) -> ArchModel:
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read())


# --------------------------------------------------------------------------
# serializer


def _q(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t") + '"'


def _num(x: float) -> str:
    return repr(float(x))


def _net(n: Optional[IPv4Network]) -> str:
    return "any" if n is None else str(n)


def _ports(p: Optional[tuple[int, int]]) -> str:
    if p is None:
        return "any"
    return str(p[0]) if p[0] == p[1] else f"{p[0]}-{p[1]}"


def _lst(items: Iterable[str]) -> str:
    return "[" + ", ".join(items) + "]"


def _fmt_rule(r: FirewallRule) -> str:
    return f"({r.action}, {_net(r.src)}, {_net(r.dst)}, {r.proto or 'any'}, {_ports(r.port)})"


def _fmt_step(s: ProcessStep) -> str:
    args = [_q(s.task) if not ID_PATTERN.match(s.task) else s.task, s.actor]
    if s.delegated:
        args.append(_lst(f"({p.right}, {p.target})" for p in s.delegated))
    return "(" + ", ".join(args) + ")"


def _fmt_ref(r: EnforcementRef) -> str:
    return r.target if r.rule_index is None else f"({r.target}, {r.rule_index})"


def _words(s: str) -> str:
    return s if ID_PATTERN.match(s) else _q(s)


def _entity_props(e: Entity) -> list[tuple[str, str]]:
    props: list[tuple[str, Optional[str]]]
    if isinstance(e, AssetEntity):
        props = [
            ("kind", e.device_class),
            ("endpoints", _lst(e.link_endpoints) if e.link_endpoints is not None else None),
            ("medium", e.medium),
            ("host", e.host),
            ("zone", e.zone),
        ]
    elif isinstance(e, CommEntity):
        props = [
            ("kind", e.enabler_class),
            ("device", e.device),
            ("address", str(e.address) if e.address is not None else None),
            ("range", str(e.range) if e.range is not None else None),
            ("zone", e.zone),
            ("services", _lst(f"({n}, {p})" for n, p in e.services) if e.services else None),
            ("routes", _lst(f"({r.destination}, {r.next_hop})" for r in e.routes) if e.routes else None),
            ("nat", _lst(f"({m.direction}, {m.external}, {m.internal})" for m in e.nat) if e.nat else None),
            ("rules", _lst(_fmt_rule(r) for r in e.ruleset) if e.ruleset is not None else None),
        ]
    elif isinstance(e, ServiceEntity):
        props = [
            ("host", e.host),
            ("description", _q(e.description) if e.description else None),
            ("operations", _lst(e.operations) if e.operations else None),
            ("endpoint", e.endpoint_ref),
            ("protocol", e.protocol),
            ("schema", _q(e.schema) if e.schema is not None else None),
            ("fault_policy", _q(e.fault_policy) if e.fault_policy else None),
            ("sla", f"({_num(e.sla.availability)}, {_num(e.sla.responsiveness_ms)})" if e.sla else None),
            ("requires_auth", "true" if e.requires_auth else None),
            ("auth", "true" if e.auth else None),
            ("vulnerable", "true" if e.vulnerable else None),
            ("note", _q(e.vulnerability_note) if e.vulnerability_note is not None else None),
        ]
    elif isinstance(e, DataFlow):
        props = [
            ("from", e.source),
            ("to", e.target),
            ("protocol", e.protocol),
            ("payload", _words(e.payload) if e.payload is not None else None),
        ]
    elif isinstance(e, Composition):
        props = [("outer", e.outer), ("composed_of", _lst(e.inner))]
    else:
        props = [
            ("roles", _lst(e.roles) if e.roles else None),
            ("privileges", _lst(f"({p.right}, {p.target})" for p in e.privileges) if e.privileges else None),
            ("steps", _lst(_fmt_step(s) for s in e.steps) if e.steps else None),
            ("statement", _q(e.statement) if e.statement is not None else None),
            ("enforced_by", _lst(_fmt_ref(r) for r in e.enforced_by) if e.enforced_by else None),
            ("governs", _lst(e.governs) if e.governs else None),
        ]
    return [(k, v) for k, v in props if v is not None]


def explicit_edges(model: ArchModel) -> list[CrossLayerEdge]:
    """Edges the serialized form must spell out in the ``edges`` block."""
    implied = {e.key for ent in model.entities.values() for e in implied_edges(ent)}
    return sorted((e for e in model.edges if e.key not in implied or e.p is not None), key=lambda e: e.key)


def serialize_model(model: ArchModel, check: bool = True) -> str:
    """Canonical ADL text.  With ``check`` the model must validate cleanly."""
    if check:
        violations = validate_model(model)
        if violations:
            raise InvalidModelError(violations)
    out = [f"model {_q(model.name)}", ""]
    for layer in LAYER_ORDER:
        out.append(f"layer {layer} {{")
        for eid in model.ids(layer):
            e = model.entities[eid]
            out.append(f"  {e.kind} {eid} {{")
            for key, val in _entity_props(e):
                out.append(f"    {key}: {val};")
            out.append("  }")
        out.append("}")
        out.append("")
    extra = explicit_edges(model)
    if extra:
        out.append("edges {")
        for e in extra:
            tail = f" {{ p: {_num(e.p)}; }}" if e.p is not None else ";"
            out.append(f"  {e.kind} {e.source} -> {e.target}{tail}")
        out.append("}")
        out.append("")
    for name in sorted(model.viewpoint_specs):
        spec = model.viewpoint_specs[name]
        out.append(f"viewpoint {name} {{")
        for key, val in _viewpoint_props(spec):
            out.append(f"  {key}: {val};")
        out.append("}")
        out.append("")
    return "\n".join(out).rstrip("\n") + "\n"


def _viewpoint_props(spec: ViewpointSpec) -> list[tuple[str, str]]:
    props = []
    if spec.layers:
        props.append(("layers", _lst(str(l) for l in LAYER_ORDER if l in spec.layers)))
    for key in ("zones", "kinds", "seeds", "expand"):
        vals = getattr(spec, key)
        if vals:
            props.append((key, _lst(sorted(vals))))
    if spec.depth is not None:
        props.append(("depth", str(spec.depth)))
    return props


# --------------------------------------------------------------------------
# structured (JSON-ready) form


def _jsonable(x: Any) -> Any:
    if isinstance(x, (IPv4Address, IPv4Network)):
        return str(x)
    if isinstance(x, Layer):
        return x.value
    if isinstance(x, (tuple, list)):
        return [_jsonable(i) for i in x]
    if isinstance(x, (frozenset, set)):
        return sorted(_jsonable(i) for i in x)
    if hasattr(x, "__dataclass_fields__"):
        return {k: _jsonable(getattr(x, k)) for k in x.__dataclass_fields__}
    return x


def entity_to_dict(e: Entity) -> dict:
    d = _jsonable(e)
    # kind first, id first: keeps the JSON readable and stable
    return {"id": d.pop("id"), "kind": d.pop("kind"), **d}


def model_to_dict(model: ArchModel) -> dict:
    return {
        "name": model.name,
        "layers": {
            str(layer): [entity_to_dict(model.entities[i]) for i in model.ids(layer)] for layer in LAYER_ORDER
        },
        "edges": [_jsonable(e) for e in sorted(model.edges, key=lambda e: e.key)],
        "viewpoints": {n: _jsonable(model.viewpoint_specs[n]) for n in sorted(model.viewpoint_specs)},
    }


def model_to_json(model: ArchModel) -> str:
    return json.dumps(model_to_dict(model), indent=2) + "\n"


# --------------------------------------------------------------------------
# asset inventory import

INVENTORY_HEADER = ("id", "asset_type", "host", "zone")
INVENTORY_TYPES = ("device", "software", "database", "network", "data")


@dataclass(frozen=True)
class InventoryRow:
    id: str
    asset_type: str
    host: Optional[str] = None
    zone: Optional[str] = None
    line: int = 0


def parse_inventory(text: str) -> tuple[list[InventoryRow], list[Diagnostic]]:
    """Read ``id,asset_type,host,zone`` CSV text into rows."""
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        return [], [Diagnostic("error", 1, 1, "missing header id,asset_type,host,zone")]
    header = tuple(c.strip() for c in next(csv.reader([lines[0]])))
    if header != INVENTORY_HEADER:
        return [], [Diagnostic("error", 1, 1, "header must be id,asset_type,host,zone")]
    rows: list[InventoryRow] = []
    diags: list[Diagnostic] = []
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        cells = [c.strip() for c in next(csv.reader(io.StringIO(raw)))]
        if len(cells) != 4:
            diags.append(Diagnostic("warning", lineno, 1, f"expected 4 columns, found {len(cells)}"))
            continue
        rid, atype, host, zone = cells
        rows.append(InventoryRow(rid, atype, host or None, zone or None, lineno))
    return rows, diags


def import_asset_inventory(
    rows: list[InventoryRow],
) -> tuple[list[AssetEntity], list[CrossLayerEdge], list[Diagnostic]]:
    """Turn inventory rows into asset entities plus their ``hosted_on`` edges.

    Bad rows are skipped with a warning; ``database`` rows become ``data``
    entities and ``network`` rows become links whose endpoints still have to
    be declared.
    """
    entities: list[AssetEntity] = []
    edges: list[CrossLayerEdge] = []
    diags: list[Diagnostic] = []
    seen: set[str] = set()
    for idx, row in enumerate(rows):
        line = row.line or idx + 2

        def warn(msg: str) -> None:
            diags.append(Diagnostic("warning", line, 1, f"{row.id or '<empty>'}: {msg}"))

        if not row.id or not ID_PATTERN.match(row.id):
            warn("invalid id, row skipped")
            continue
        if row.id in seen:
            warn("duplicate id, row skipped")
            continue
        if row.asset_type not in INVENTORY_TYPES:
            warn(f"unknown asset_type {row.asset_type!r}, row skipped")
            continue
        if row.zone is not None and not ID_PATTERN.match(row.zone):
            warn(f"invalid zone {row.zone!r}, row skipped")
            continue
        hosted = row.asset_type in ("software", "database", "data")
        if hosted and (row.host is None or not ID_PATTERN.match(row.host)):
            warn(f"{row.asset_type} needs a valid host, row skipped")
            continue
        seen.add(row.id)
        if row.asset_type == "device":
            if row.host is not None:
                warn("host ignored for device")
            entities.append(AssetEntity(row.id, "device", zone=row.zone))
        elif row.asset_type == "network":
            warn("network imported as a link; declare its endpoints")
            entities.append(AssetEntity(row.id, "link", zone=row.zone))
        else:
            kind = "software" if row.asset_type == "software" else "data"
            entities.append(AssetEntity(row.id, kind, zone=row.zone, host=row.host))
            edges.append(CrossLayerEdge("hosted_on", row.id, row.host))
    return entities, edges, diags


def inventory_model(text: str, name: str = "inventory") -> tuple[ArchModel, list[Diagnostic]]:
    rows, diags = parse_inventory(text)
    entities, edges, more = import_asset_inventory(rows)
    model = ArchModel(name)
    for e in entities:
        model.add_entity(Layer.ASSET, e)
    for e in edges:
        model.add_edge(e)
    return model, diags + more


__all__ = [
    "Diagnostic", "InventoryRow", "parse_model", "check_source", "load_model", "serialize_model",
    "explicit_edges", "model_to_dict", "model_to_json", "entity_to_dict", "parse_inventory",
    "import_asset_inventory", "inventory_model",
]
