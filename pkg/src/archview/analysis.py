"""Cross-layer security analyses producing :class:`Finding` records."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Optional

from .errors import NotAPolicyError, UnknownEntityError
from .model import ArchModel, AssetEntity, CommEntity, Layer, OrgEntity, ServiceEntity, effective_zone
from .reachability import Topology, reach_status

SEVERITIES = ("info", "warning", "critical")
DEFAULT_EXTERNAL_ZONES = ("internet",)


@dataclass(frozen=True, order=True)
class Finding:
    code: str
    subject: str
    related: tuple[str, ...] = ()
    severity: str = "info"
    message: str = ""

    def to_line(self) -> str:
        rel = ",".join(self.related) if self.related else "-"
        return f"{self.severity} {self.code} {self.subject} {rel} {self.message}"


def report_text(findings: Iterable[Finding]) -> str:
    return "".join(f.to_line() + "\n" for f in sorted(findings))


def report_json(findings: Iterable[Finding]) -> str:
    rows = [
        {"code": f.code, "subject": f.subject, "related": list(f.related), "severity": f.severity, "message": f.message}
        for f in sorted(findings)
    ]
    return json.dumps(rows, indent=2) + "\n"


def _services(model: ArchModel) -> dict[str, ServiceEntity]:
    return {e.id: e for e in model.entities.values() if isinstance(e, ServiceEntity)}


def composition_attack_surface(model: ArchModel, vulnerable: Optional[Iterable[str]] = None) -> list[Finding]:
    """Services exposed to a vulnerable service through compositions or flows.

    ``composed_with`` links expose both partners; ``flows_to`` exposes the
    receiving service only.  Each exposed service gets one shortest chain,
    found by a breadth-first search from all vulnerable services at once.
    """
    services = _services(model)
    if vulnerable is None:
        vuln = sorted(s for s, e in services.items() if e.vulnerable)
    else:
        vuln = sorted(set(vulnerable))
        unknown = [v for v in vuln if v not in services]
        if unknown:
            raise UnknownEntityError(f"not a service: {', '.join(unknown)}")

    adj: dict[str, set[str]] = {}
    for e in model.edges:
        if e.source not in services or e.target not in services:
            continue
        if e.kind == "composed_with":
            adj.setdefault(e.source, set()).add(e.target)
            adj.setdefault(e.target, set()).add(e.source)
        elif e.kind == "flows_to":
            adj.setdefault(e.source, set()).add(e.target)

    parent: dict[str, Optional[str]] = {v: None for v in vuln}
    queue = deque(vuln)
    while queue:
        u = queue.popleft()
        for w in sorted(adj.get(u, ())):
            if w not in parent:
                parent[w] = u
                queue.append(w)

    findings = [Finding("vulnerable_service", v, (), "info", f"{v} is flagged vulnerable") for v in vuln]
    for svc in sorted(set(parent) - set(vuln)):
        chain = [svc]
        while parent[chain[-1]] is not None:
            chain.append(parent[chain[-1]])
        chain.reverse()
        findings.append(
            Finding(
                "composition_exposure", svc, tuple(chain), "info",
                f"{svc} exposed to vulnerable {chain[0]} via {' -> '.join(chain)}",
            )
        )
    return sorted(findings)


def _service_endpoints(model: ArchModel, topo: Topology, svc: ServiceEntity) -> list[str]:
    if svc.endpoint_ref is not None:
        return [svc.endpoint_ref] if svc.endpoint_ref in topo.comm else []
    device, seen = svc.host, set()
    while device is not None and device not in seen:
        seen.add(device)
        host = model.entities.get(device)
        if isinstance(host, AssetEntity) and host.kind == "device":
            break
        device = getattr(host, "host", None)
    return [c for c in topo.endpoints() if topo.comm[c].device == device] if device else []


def _composed_with_auth(model: ArchModel, sid: str, auth: set[str]) -> bool:
    for e in model.edges:
        if e.kind != "composed_with":
            continue
        if (e.source == sid and e.target in auth) or (e.target == sid and e.source in auth):
            return True
    return False


def detect_missing_authentication(
    model: ArchModel,
    external_zones: Iterable[str] = DEFAULT_EXTERNAL_ZONES,
    topology: Optional[Topology] = None,
) -> list[Finding]:
    """Externally reachable services that neither require authentication nor
    are composed with an authentication service.
    """
    zones = set(external_zones)
    topo = topology or Topology(model)
    services = _services(model)
    auth = {s for s, e in services.items() if e.auth}
    sources = [c for c in topo.endpoints() if effective_zone(model, c) in zones]
    findings = []
    for sid in sorted(services):
        svc = services[sid]
        if svc.auth or svc.requires_auth or _composed_with_auth(model, sid, auth):
            continue
        hit = None
        for dst in _service_endpoints(model, topo, svc):
            ports = [sp for sp in topo.destination_ports(dst) if svc.protocol is None or sp[0] == svc.protocol]
            for src in sources:
                if src == dst:
                    continue
                for proto, port in ports:
                    if reach_status(topo, src, dst, proto, port).status == "reachable":
                        hit = (src, dst, proto, port)
                        break
                if hit:
                    break
            if hit:
                break
        if hit:
            src, dst, proto, port = hit
            findings.append(
                Finding(
                    "missing_authentication", sid, (src, dst), "critical",
                    f"{sid} reachable from {src} over {proto}/{port} without authentication",
                )
            )
    return sorted(findings)


@dataclass(frozen=True)
class PolicyTrace:
    policy: str
    mechanisms: tuple[tuple[str, Layer, Optional[int]], ...]
    gaps: tuple[str, ...]

    def to_text(self) -> str:
        lines = [f"policy {self.policy}"]
        for eid, layer, idx in self.mechanisms:
            rule = "" if idx is None else f" rule {idx}"
            lines.append(f"mechanism {eid} {layer}{rule}")
        lines.extend(f"gap {g}" for g in self.gaps)
        return "\n".join(lines) + "\n"


def policy_trace(model: ArchModel, policy: str) -> PolicyTrace:
    """Resolve a policy's ``enforced_by`` entries to lower-layer mechanisms."""
    pol = model.entities.get(policy)
    if not isinstance(pol, OrgEntity) or pol.kind != "policy":
        raise NotAPolicyError(f"{policy!r} is not a policy")
    mechanisms = []
    gaps = []
    if not pol.enforced_by:
        gaps.append("no mechanisms declared")
    for ref in pol.enforced_by:
        target = model.entities.get(ref.target)
        if target is None:
            gaps.append(f"dangling reference: {ref.target}")
            continue
        layer = model.layer_of(ref.target)
        if layer is Layer.ORGANIZATION:
            gaps.append(f"{ref.target} is an organization-layer entity, not a mechanism")
            continue
        if ref.rule_index is not None:
            rules = target.ruleset if isinstance(target, CommEntity) else None
            if not rules or not 0 <= ref.rule_index < len(rules):
                gaps.append(f"{ref.target} has no rule {ref.rule_index}")
                continue
        mechanisms.append((ref.target, layer, ref.rule_index))
    return PolicyTrace(policy, tuple(mechanisms), tuple(gaps))


def policy_gap_findings(model: ArchModel) -> list[Finding]:
    out = []
    for e in model.of_kind("policy"):
        if not isinstance(e, OrgEntity):
            continue
        for gap in policy_trace(model, e.id).gaps:
            severity = "warning" if gap.startswith("dangling") else "info"
            out.append(Finding("policy_gap", e.id, (), severity, gap))
    return sorted(out)


def privilege_audit(model: ArchModel) -> list[Finding]:
    """Dangling privilege targets, persons without roles, and process steps
    that delegate more than the acting role holds.
    """
    findings = []
    roles = {e.id: e for e in model.entities.values() if isinstance(e, OrgEntity) and e.kind == "role"}
    for e in model.entities.values():
        if not isinstance(e, OrgEntity):
            continue
        if e.kind == "role":
            for pv in e.privileges:
                if pv.target not in model.entities:
                    findings.append(Finding(
                        "dangling_privilege", e.id, (pv.target,), "warning",
                        f"{pv.right} privilege on missing entity {pv.target}",
                    ))
        elif e.kind == "person":
            if not e.roles:
                findings.append(Finding("person_without_role", e.id, (), "info", f"{e.id} holds no role"))
            for r in e.roles:
                if r not in roles:
                    findings.append(Finding("dangling_role", e.id, (r,), "warning", f"role {r} does not exist"))
        elif e.kind == "process":
            for step in e.steps:
                role = roles.get(step.actor)
                if role is None:
                    findings.append(Finding(
                        "dangling_role", e.id, (step.actor,), "warning",
                        f"step {step.task} acted by missing role {step.actor}",
                    ))
                    continue
                held = {(p.right, p.target) for p in role.privileges}
                for pv in step.delegated:
                    if pv.target not in model.entities:
                        findings.append(Finding(
                            "dangling_privilege", e.id, (pv.target,), "warning",
                            f"step {step.task} delegates {pv.right} on missing entity {pv.target}",
                        ))
                    elif (pv.right, pv.target) not in held:
                        findings.append(Finding(
                            "excess_delegation", e.id, (step.actor, pv.target), "info",
                            f"step {step.task} delegates {pv.right}({pv.target}) which role {step.actor} lacks",
                        ))
    return sorted(set(findings))


def analyze(model: ArchModel, external_zones: Iterable[str] = DEFAULT_EXTERNAL_ZONES) -> list[Finding]:
    """Every analysis above, merged into one sorted report."""
    topo = Topology(model)
    findings = (
        composition_attack_surface(model)
        + detect_missing_authentication(model, external_zones, topo)
        + privilege_audit(model)
        + policy_gap_findings(model)
    )
    return sorted(findings)
