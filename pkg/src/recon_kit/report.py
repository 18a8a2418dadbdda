"""Full-report assembly and rendering.

The report aggregates every other module's output for one target: host
addresses, content type and server identity, CMS matches, registration
data, IP location, probe findings and the phishing verdict. Rendering is
deterministic: the same report always produces identical bytes, in both
the plaintext layout (documented in docs/report-format.md) and the JSON
form, which round-trips losslessly through :func:`parse_structured`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import date, datetime, timezone
from typing import Callable

from .dns_harvest import HostEntry
from .fingerprint import CmsMatch, PlatformHint, ServerBanner
from .http_probe import CanonicalUrl, HttpSnapshot, canonicalize_url
from .phish import PhishVerdict
from .version import VERSION
from .vuln_probe import InjectionPoint, ProbeEvidence, VulnFinding
from .whois_client import WhoisRecord

_RULE = "=" * 70
_KIND_ORDER = {"sqli": 0, "lfi": 1}

GeoProvider = Callable[[str], str]


@dataclass(frozen=True)
class FullReport:
    """Everything known about one target after a scan."""

    target: CanonicalUrl
    host: HostEntry | None
    content_type: str | None
    content_length: int | None
    server_banner: ServerBanner | None
    platform: PlatformHint | None
    cms: tuple[CmsMatch, ...]
    whois: WhoisRecord | None
    ip_location: str
    findings: tuple[VulnFinding, ...]
    phish: PhishVerdict | None
    generated_at: datetime
    tool_version: str


def assemble_report(
    target: CanonicalUrl,
    *,
    snapshot: HttpSnapshot | None = None,
    host: HostEntry | None = None,
    server_banner: ServerBanner | None = None,
    platform: PlatformHint | None = None,
    cms: tuple[CmsMatch, ...] | list[CmsMatch] = (),
    whois: WhoisRecord | None = None,
    findings: tuple[VulnFinding, ...] | list[VulnFinding] = (),
    phish: PhishVerdict | None = None,
    generated_at: datetime | None = None,
    geo_provider: GeoProvider | None = None,
    tool_version: str = VERSION,
) -> FullReport:
    """Combine component outputs deterministically into a FullReport.

    Content type and length are lifted from the snapshot headers. Findings
    are ordered SQLi first, then LFI. ``generated_at`` is injectable so
    golden-file tests can pin it; it defaults to the current UTC time.
    ``geo_provider`` maps an IP address to a location string; without one
    the IP location is reported as "unknown".
    """
    content_type: str | None = None
    content_length: int | None = None
    if snapshot is not None:
        content_type = snapshot.headers.get("Content-Type")
        raw_length = snapshot.headers.get("Content-Length")
        if raw_length is not None:
            try:
                content_length = int(raw_length.strip())
            except ValueError:
                content_length = None

    ip_location = "unknown"
    if geo_provider is not None and host is not None and host.addresses:
        ip_location = geo_provider(host.addresses[0]) or "unknown"

    ordered = tuple(
        sorted(findings, key=lambda f: _KIND_ORDER.get(f.kind, len(_KIND_ORDER)))
    )
    return FullReport(
        target=target,
        host=host,
        content_type=content_type,
        content_length=content_length,
        server_banner=server_banner,
        platform=platform,
        cms=tuple(cms),
        whois=whois,
        ip_location=ip_location,
        findings=ordered,
        phish=phish,
        generated_at=generated_at or datetime.now(timezone.utc),
        tool_version=tool_version,
    )


def _section(title: str) -> str:
    return f"-- {title} ".ljust(70, "-")


def _line(label: str, value: str | None) -> str:
    return f"{label:<15}: {value if value is not None else 'unavailable'}"


def _platform_text(platform: PlatformHint | None) -> str | None:
    if platform is None:
        return None
    text = platform.os_family
    if platform.os_detail:
        text += f" ({platform.os_detail})"
    if platform.basis:
        text += f" [basis: {platform.basis}]"
    return text


def _finding_lines(finding: VulnFinding) -> list[str]:
    status = finding.status.replace("_", " ")
    head = f"{finding.kind.upper():<4}: {status}"
    if finding.dbms_guess:
        head += f" ({finding.dbms_guess})"
    lines = [head]
    for item in finding.evidence:
        point = item.point
        lines.append(f"    point {point.name}#{point.index} -> {item.payload_url}")
        lines.append(f"      matched : {item.signature}")
        lines.append(f"      excerpt : {item.excerpt}")
    if finding.status == "vulnerable" and finding.remediation:
        lines.append(f"    remediation: {finding.remediation}")
    return lines


def render_plaintext(report: FullReport) -> str:
    """Render the fixed-layout plaintext report.

    Identical reports render to identical bytes; every field group has a
    section even when its data is unavailable.
    """
    out: list[str] = [
        _RULE,
        " WEB APPLICATION RECONNAISSANCE REPORT",
        _RULE,
        f"Generated   : {report.generated_at.isoformat()}",
        f"Tool version: recon-kit {report.tool_version}",
        "",
        _section("Target"),
        _line("Target URL", report.target.render()),
        "",
        _section("Host addresses"),
    ]
    host = report.host
    out.append(_line("Queried name", host.query if host else None))
    out.append(_line("Canonical name", host.canonical_name if host else None))
    if host:
        out.append(_line("Aliases", ", ".join(host.aliases) if host.aliases else "(none)"))
        out.append(_line("IP address", ", ".join(host.addresses)))
    else:
        out.append(_line("Aliases", None))
        out.append(_line("IP address", None))
    out.append("")

    out.append(_section("HTTP fingerprint"))
    out.append(_line("Content type", report.content_type))
    length = report.content_length
    out.append(_line("Content length", str(length) if length is not None else None))
    banner = report.server_banner
    out.append(_line("Web server type", banner.raw if banner else None))
    if banner and banner.product:
        product = banner.product + (f" {banner.version}" if banner.version else "")
    else:
        product = None
    out.append(_line("Server product", product))
    out.append(_line("Platform", _platform_text(report.platform)))
    out.append("")

    out.append(_section("Content management system"))
    if report.cms:
        for match in report.cms:
            version = match.version if match.version else "(version unknown)"
            out.append(f"{match.cms} {version} (confidence {match.confidence:.3f})")
            for sig_id, excerpt in match.evidence:
                out.append(f"    {sig_id}: {excerpt}")
    else:
        out.append("none identified")
    out.append("")

    out.append(_section("Domain registration"))
    whois = report.whois
    out.append(_line("Domain name", whois.domain if whois and whois.domain else None))
    out.append(_line("Registrar", whois.registrar if whois else None))
    out.append(_line("IP location", report.ip_location))
    creation = whois.creation_date.isoformat() if whois and whois.creation_date else None
    expiry = whois.expiry_date.isoformat() if whois and whois.expiry_date else None
    out.append(_line("Creation date", creation))
    out.append(_line("Expiry date", expiry))
    out.append("")

    out.append(_section("Vulnerability report"))
    if report.findings:
        for finding in report.findings:
            out.extend(_finding_lines(finding))
    else:
        out.append("no active probes run")
    out.append("")

    out.append(_section("Phishing assessment"))
    phish = report.phish
    out.append(_line("Score", f"{phish.score:.2f}" if phish else None))
    out.append(_line("Label", phish.label if phish else None))
    if phish:
        triggered = (
            ", ".join(f"{name} (+{weight:.2f})" for name, weight in phish.triggered)
            if phish.triggered
            else "(none)"
        )
    else:
        triggered = None
    out.append(_line("Triggered", triggered))
    out.append(_RULE)
    return "\n".join(out) + "\n"


def _report_to_dict(report: FullReport) -> dict:
    host = report.host
    banner = report.server_banner
    platform = report.platform
    whois = report.whois
    phish = report.phish
    return {
        "tool_version": report.tool_version,
        "generated_at": report.generated_at.isoformat(),
        "target": report.target.render(),
        "host": None
        if host is None
        else {
            "query": host.query,
            "canonical_name": host.canonical_name,
            "aliases": list(host.aliases),
            "addresses": list(host.addresses),
        },
        "content_type": report.content_type,
        "content_length": report.content_length,
        "server_banner": None
        if banner is None
        else {
            "raw": banner.raw,
            "product": banner.product,
            "version": banner.version,
            "comments": list(banner.comments),
        },
        "platform": None
        if platform is None
        else {
            "os_family": platform.os_family,
            "os_detail": platform.os_detail,
            "basis": platform.basis,
        },
        "cms": [
            {
                "cms": m.cms,
                "version": m.version,
                "confidence": m.confidence,
                "evidence": [list(pair) for pair in m.evidence],
            }
            for m in report.cms
        ],
        "whois": None
        if whois is None
        else {
            "domain": whois.domain,
            "registrar": whois.registrar,
            "creation_date": whois.creation_date.isoformat()
            if whois.creation_date
            else None,
            "expiry_date": whois.expiry_date.isoformat() if whois.expiry_date else None,
            "server_chain": list(whois.server_chain),
            "raw": whois.raw,
        },
        "ip_location": report.ip_location,
        "findings": [
            {
                "kind": f.kind,
                "status": f.status,
                "evidence": [
                    {
                        "point": {
                            "name": e.point.name,
                            "index": e.point.index,
                            "original_value": e.point.original_value,
                        },
                        "payload_url": e.payload_url,
                        "signature": e.signature,
                        "excerpt": e.excerpt,
                    }
                    for e in f.evidence
                ],
                "dbms_guess": f.dbms_guess,
                "remediation": f.remediation,
            }
            for f in report.findings
        ],
        "phish": None
        if phish is None
        else {
            "score": phish.score,
            "label": phish.label,
            "triggered": [list(pair) for pair in phish.triggered],
        },
    }


def render_structured(report: FullReport) -> bytes:
    """Serialize to UTF-8 JSON with a stable key order and null absences."""
    return json.dumps(_report_to_dict(report), ensure_ascii=False, indent=2).encode(
        "utf-8"
    )


def parse_structured(data: bytes) -> FullReport:
    """Rebuild a FullReport from :func:`render_structured` output."""
    doc = json.loads(data.decode("utf-8"))
    host = doc["host"]
    banner = doc["server_banner"]
    platform = doc["platform"]
    whois = doc["whois"]
    phish = doc["phish"]
    return FullReport(
        target=canonicalize_url(doc["target"]),
        host=None
        if host is None
        else HostEntry(
            query=host["query"],
            canonical_name=host["canonical_name"],
            aliases=tuple(host["aliases"]),
            addresses=tuple(host["addresses"]),
        ),
        content_type=doc["content_type"],
        content_length=doc["content_length"],
        server_banner=None
        if banner is None
        else ServerBanner(
            raw=banner["raw"],
            product=banner["product"],
            version=banner["version"],
            comments=tuple(banner["comments"]),
        ),
        platform=None
        if platform is None
        else PlatformHint(
            os_family=platform["os_family"],
            os_detail=platform["os_detail"],
            basis=platform["basis"],
        ),
        cms=tuple(
            CmsMatch(
                cms=m["cms"],
                version=m["version"],
                confidence=m["confidence"],
                evidence=tuple((sig_id, excerpt) for sig_id, excerpt in m["evidence"]),
            )
            for m in doc["cms"]
        ),
        whois=None
        if whois is None
        else WhoisRecord(
            domain=whois["domain"],
            registrar=whois["registrar"],
            creation_date=date.fromisoformat(whois["creation_date"])
            if whois["creation_date"]
            else None,
            expiry_date=date.fromisoformat(whois["expiry_date"])
            if whois["expiry_date"]
            else None,
            server_chain=tuple(whois["server_chain"]),
            raw=whois["raw"],
        ),
        ip_location=doc["ip_location"],
        findings=tuple(
            VulnFinding(
                kind=f["kind"],
                status=f["status"],
                evidence=tuple(
                    ProbeEvidence(
                        point=InjectionPoint(
                            name=e["point"]["name"],
                            index=e["point"]["index"],
                            original_value=e["point"]["original_value"],
                        ),
                        payload_url=e["payload_url"],
                        signature=e["signature"],
                        excerpt=e["excerpt"],
                    )
                    for e in f["evidence"]
                ),
                dbms_guess=f["dbms_guess"],
                remediation=f["remediation"],
            )
            for f in doc["findings"]
        ),
        phish=None
        if phish is None
        else PhishVerdict(
            score=phish["score"],
            label=phish["label"],
            triggered=tuple((name, weight) for name, weight in phish["triggered"]),
        ),
        generated_at=datetime.fromisoformat(doc["generated_at"]),
        tool_version=doc["tool_version"],
    )
