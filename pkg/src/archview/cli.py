"""``archview`` command-line tool.

Exit status: 0 when the command ran cleanly, 1 when it found violations,
warnings, critical findings, blocked flows or policy gaps, and 2 for usage
errors, unreadable files and parse errors.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys
from dataclasses import replace
from typing import Optional, Sequence, TextIO

from . import __version__
from .adl import inventory_model, load_model, model_to_json, serialize_model
from .analysis import DEFAULT_EXTERNAL_ZONES, analyze, policy_trace, report_json, report_text
from .errors import ArchViewError, ParseError, UnknownEntityError
from .export import export_graph
from .model import EDGE_KINDS, ArchModel, Layer, ViewpointSpec, validate_model
from .reachability import Topology, compute_reachability, reach_status
from .viewpoints import DEFAULT_PROBABILITY, build_compromise_graph, extract_viewpoint, propagate_compromise

EXIT_OK, EXIT_FINDINGS, EXIT_USAGE = 0, 1, 2

_COLORS = {"reachable": "32", "info": "36", "warning": "33", "critical": "31", "blocked": "31", "OK": "32"}


class _Exit(Exception):
    def __init__(self, code: int):
        self.code = code


class _Ctx:
    def __init__(self, stdout: TextIO, stderr: TextIO):
        self.out, self.err = stdout, stderr
        mode = os.environ.get("ARCHVIEW_COLOR", "auto").lower()
        self.color = mode != "never" and hasattr(stdout, "isatty") and stdout.isatty()

    def style(self, word: str) -> str:
        code = _COLORS.get(word)
        return f"\033[{code}m{word}\033[0m" if self.color and code else word

    def write(self, text: str) -> None:
        self.out.write(text)

    def error(self, msg: str) -> None:
        self.err.write(f"archview: {msg}\n")


def _csv(text: str) -> list[str]:
    return [t for t in (x.strip() for x in text.split(",")) if t]


def _load(ctx: _Ctx, path: str, require_valid: bool = True) -> ArchModel:
    try:
        model = load_model(path)
    except OSError as exc:
        ctx.error(f"cannot read {path}: {exc.strerror or exc}")
        raise _Exit(EXIT_USAGE)
    except ParseError as exc:
        for d in exc.diagnostics:
            ctx.err.write(f"{path}:{d}\n")
        raise _Exit(EXIT_USAGE)
    if require_valid:
        violations = validate_model(model)
        if violations:
            for v in violations:
                ctx.err.write(f"{path}: {v.subject}: {v.code}: {v.message}\n")
            ctx.error(f"{len(violations)} violation(s); fix the model first")
            raise _Exit(EXIT_FINDINGS)
    return model


def _viewpoint_spec(ctx: _Ctx, model: ArchModel, args) -> Optional[ViewpointSpec]:
    spec = None
    if args.name:
        spec = model.viewpoint_specs.get(args.name)
        if spec is None:
            ctx.error(f"no viewpoint named {args.name!r}")
            raise _Exit(EXIT_USAGE)
    overrides = {}
    if args.layers is not None:
        try:
            overrides["layers"] = frozenset(Layer(x) for x in _csv(args.layers))
        except ValueError as exc:
            ctx.error(str(exc))
            raise _Exit(EXIT_USAGE)
    for key in ("zones", "kinds", "seeds"):
        value = getattr(args, key)
        if value is not None:
            overrides[key] = frozenset(_csv(value))
    if args.expand is not None:
        kinds = frozenset(_csv(args.expand))
        bad = sorted(kinds - set(EDGE_KINDS))
        if bad:
            ctx.error(f"unknown edge kind(s): {', '.join(bad)}")
            raise _Exit(EXIT_USAGE)
        overrides["expand"] = kinds
    if args.depth is not None:
        if args.depth == "unlimited":
            overrides["depth"] = None
        elif args.depth.isdigit():
            overrides["depth"] = int(args.depth)
        else:
            ctx.error(f"depth must be a non-negative integer or 'unlimited', got {args.depth!r}")
            raise _Exit(EXIT_USAGE)
    if spec is None and not overrides:
        return None
    return replace(spec or ViewpointSpec("cli"), **overrides)


def _extract(ctx: _Ctx, model: ArchModel, spec: ViewpointSpec):
    try:
        vp = extract_viewpoint(model, spec)
    except UnknownEntityError as exc:
        ctx.error(str(exc))
        raise _Exit(EXIT_USAGE)
    for w in vp.warnings:
        ctx.err.write(f"warning: {w}\n")
    return vp


# --------------------------------------------------------------------------
# subcommands


def cmd_validate(ctx: _Ctx, args) -> int:
    model = _load(ctx, args.file, require_valid=False)
    violations = validate_model(model)
    if not violations:
        ctx.write(ctx.style("OK") + "\n")
        return EXIT_OK
    for v in violations:
        ctx.write(f"{v.subject} {v.code} {v.message}\n")
    return EXIT_FINDINGS


def cmd_reachability(ctx: _Ctx, args) -> int:
    model = _load(ctx, args.file)
    topo = Topology(model)
    try:
        r = reach_status(topo, args.src, args.dst, args.proto, args.port)
    except UnknownEntityError as exc:
        ctx.error(str(exc))
        return EXIT_USAGE
    if args.format == "json":
        ctx.write(json.dumps({
            "src": args.src, "dst": args.dst, "proto": args.proto, "port": args.port, "status": r.status,
            "blocker": r.blocker, "rule_index": r.rule_index,
            "path": list(r.path.hops) if r.path is not None else None,
        }, indent=2) + "\n")
    elif r.status == "reachable":
        ctx.write(f"{ctx.style('reachable')} via {' -> '.join(r.path.hops)}\n")
    elif r.status == "blocked":
        rule = "default deny" if r.rule_index is None else f"rule {r.rule_index}"
        ctx.write(f"{ctx.style('blocked')} by {r.blocker} {rule}\n")
        ctx.write(f"path {' -> '.join(r.path.hops)}\n")
    elif r.status == "no_path":
        ctx.write("no path\n")
    else:
        ctx.write(f"protocol mismatch: {args.dst} does not serve {args.proto}\n")
    return EXIT_OK if r.status == "reachable" else EXIT_FINDINGS


def cmd_matrix(ctx: _Ctx, args) -> int:
    model = _load(ctx, args.file)
    matrix = compute_reachability(model)
    if args.format == "json":
        ctx.write(json.dumps(matrix.to_dict(), indent=2) + "\n")
    else:
        ctx.write(matrix.to_text())
    return EXIT_OK


def _viewpoint_text(model: ArchModel, vp) -> str:
    lines = [f"viewpoint {vp.spec.name}"]
    for eid in sorted(vp.entities):
        lines.append(f"entity {model.layer_of(eid)} {model.entities[eid].kind} {eid}")
    for e in vp.edges:
        p = "" if e.p is None else f" p={e.p!r}"
        lines.append(f"edge {e.kind} {e.source} {e.target}{p}")
    return "\n".join(lines) + "\n"


def cmd_viewpoint(ctx: _Ctx, args) -> int:
    model = _load(ctx, args.file)
    spec = _viewpoint_spec(ctx, model, args)
    if spec is None:
        ctx.error("give --name or at least one selection flag")
        return EXIT_USAGE
    vp = _extract(ctx, model, spec)
    if args.format == "text":
        ctx.write(_viewpoint_text(model, vp))
    else:
        ctx.write(export_graph(model, args.format, viewpoint=vp))
    return EXIT_OK


def cmd_compromise(ctx: _Ctx, args) -> int:
    model = _load(ctx, args.file)
    spec = _viewpoint_spec(ctx, model, args) or ViewpointSpec("model")
    vp = _extract(ctx, model, spec)
    seeds = set(_csv(args.compromised)) if args.compromised else set(spec.seeds)
    if not seeds:
        ctx.error("no compromised seeds; pass --compromised")
        return EXIT_USAGE
    if not 0.0 <= args.default_p <= 1.0:
        ctx.error("--default-p must lie in [0, 1]")
        return EXIT_USAGE
    try:
        graph = build_compromise_graph(vp, default=args.default_p)
        result = propagate_compromise(graph, seeds)
    except (ArchViewError, ValueError) as exc:
        ctx.error(str(exc))
        return EXIT_USAGE
    for w in graph.warnings:
        ctx.err.write(f"warning: {w}\n")
    if args.format == "json":
        ctx.write(json.dumps({n: result.probabilities[n] for n in sorted(result.probabilities)}, indent=2) + "\n")
    else:
        ctx.write(result.to_text())
    return EXIT_OK


def cmd_analyze(ctx: _Ctx, args) -> int:
    model = _load(ctx, args.file)
    zones = args.external_zone or list(DEFAULT_EXTERNAL_ZONES)
    findings = analyze(model, zones)
    if args.format == "json":
        ctx.write(report_json(findings))
    else:
        for line in report_text(findings).splitlines():
            sev, rest = line.split(" ", 1)
            ctx.write(f"{ctx.style(sev)} {rest}\n")
    return EXIT_FINDINGS if any(f.severity in ("warning", "critical") for f in findings) else EXIT_OK


def cmd_trace_policy(ctx: _Ctx, args) -> int:
    model = _load(ctx, args.file)
    try:
        trace = policy_trace(model, args.policy)
    except ArchViewError as exc:
        ctx.error(str(exc))
        return EXIT_USAGE
    ctx.write(trace.to_text())
    return EXIT_FINDINGS if trace.gaps else EXIT_OK


def cmd_import_assets(ctx: _Ctx, args) -> int:
    try:
        with open(args.file, encoding="utf-8", newline="") as fh:
            text = fh.read()
    except OSError as exc:
        ctx.error(f"cannot read {args.file}: {exc.strerror or exc}")
        return EXIT_USAGE
    model, diags = inventory_model(text, args.name)
    if any(d.severity == "error" for d in diags):
        for d in diags:
            ctx.err.write(f"{args.file}:{d}\n")
        return EXIT_USAGE
    for d in diags:
        ctx.err.write(f"{args.file}:{d}\n")
    violations = validate_model(model)
    for v in violations:
        ctx.err.write(f"{args.file}: {v.subject}: {v.code}: {v.message}\n")
    ctx.write(serialize_model(model, check=False))
    return EXIT_FINDINGS if diags or violations else EXIT_OK


def cmd_export(ctx: _Ctx, args) -> int:
    model = _load(ctx, args.file)
    vp = None
    if args.viewpoint:
        spec = model.viewpoint_specs.get(args.viewpoint)
        if spec is None:
            ctx.error(f"no viewpoint named {args.viewpoint!r}")
            return EXIT_USAGE
        vp = _extract(ctx, model, spec)
    if args.format == "text":
        if vp is not None:
            ctx.write(_viewpoint_text(model, vp))
        else:
            ctx.write(serialize_model(model))
    elif args.format == "json" and vp is None:
        ctx.write(model_to_json(model))
    else:
        ctx.write(export_graph(model, args.format, viewpoint=vp))
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing


def _add_selection(p: argparse.ArgumentParser) -> None:
    p.add_argument("--name", help="named viewpoint from the model file")
    p.add_argument("--layers", help="comma-separated layers")
    p.add_argument("--zones", help="comma-separated zones")
    p.add_argument("--kinds", help="comma-separated entity kinds")
    p.add_argument("--seeds", help="comma-separated seed entity ids")
    p.add_argument("--expand", help="comma-separated edge kinds to expand along")
    p.add_argument("--depth", help="expansion depth, or 'unlimited'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="archview", description="Analyse layered SCADA architecture models.")
    parser.add_argument("--version", action="version", version=f"archview {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("validate", help="check a model for violations")
    p.add_argument("file")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("reachability", help="can a flow get from one endpoint to another")
    p.add_argument("file")
    p.add_argument("--src", required=True)
    p.add_argument("--dst", required=True)
    p.add_argument("--proto", required=True)
    p.add_argument("--port", required=True, type=int)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_reachability)

    p = sub.add_parser("matrix", help="reachability of every endpoint pair")
    p.add_argument("file")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_matrix)

    p = sub.add_parser("viewpoint", help="extract a viewpoint")
    p.add_argument("file")
    _add_selection(p)
    p.add_argument("--format", choices=("text", "dot", "json"), default="text")
    p.set_defaults(func=cmd_viewpoint)

    p = sub.add_parser("compromise", help="propagate compromise probabilities over a viewpoint")
    p.add_argument("file")
    _add_selection(p)
    p.add_argument("--compromised", help="comma-separated compromised entities (default: the viewpoint seeds)")
    p.add_argument("--default-p", type=float, default=DEFAULT_PROBABILITY, dest="default_p")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_compromise)

    p = sub.add_parser("analyze", help="run every security analysis")
    p.add_argument("file")
    p.add_argument("--external-zone", action="append", dest="external_zone")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("trace-policy", help="map a policy to its enforcing mechanisms")
    p.add_argument("file")
    p.add_argument("policy")
    p.set_defaults(func=cmd_trace_policy)

    p = sub.add_parser("import-assets", help="convert an asset inventory CSV to a model")
    p.add_argument("file")
    p.add_argument("--name", default="inventory")
    p.set_defaults(func=cmd_import_assets)

    p = sub.add_parser("export", help="render a model or viewpoint")
    p.add_argument("file")
    p.add_argument("--format", choices=("dot", "json", "text"), default="dot")
    p.add_argument("--viewpoint")
    p.set_defaults(func=cmd_export)
    return parser


def run(argv: Optional[Sequence[str]] = None, stdout: Optional[TextIO] = None, stderr: Optional[TextIO] = None) -> int:
    """Run one command and return its exit status."""
    out = stdout or sys.stdout
    err = stderr or sys.stderr
    ctx = _Ctx(out, err)
    parser = build_parser()
    try:
        with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
            args = parser.parse_args(list(sys.argv[1:] if argv is None else argv))
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return args.func(ctx, args)
    except _Exit as exc:
        return exc.code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
