"""Active probes for error-based SQL injection and local file inclusion.

Both probes mutate exactly one query parameter per request. The SQL probe
appends a single quote to each parameter value and watches for database
error strings that the unmutated baseline response did not already
contain; that differencing step is what keeps static error prose on a page
from ever producing a false positive. The LFI probe swaps each value for
path-traversal payloads and looks for content markers such as the passwd
root line.

Probes are opt-in: callers must pass ``active=True`` or no request is
ever sent.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources

from .errors import ActiveModeRequired, DataFileError, NetworkError
from .http_probe import CanonicalUrl

KIND_SQLI = "sqli"
KIND_LFI = "lfi"

STATUS_VULNERABLE = "vulnerable"
STATUS_NOT_VULNERABLE = "not_vulnerable"
STATUS_NOT_APPLICABLE = "not_applicable"
STATUS_INCONCLUSIVE = "inconclusive"

EVIDENCE_EXCERPT_LIMIT = 200

SQLI_REMEDIATION = (
    "Use parameterized queries or prepared statements; never build SQL by "
    "concatenating request parameters."
)
LFI_REMEDIATION = (
    "Resolve file parameters against a server-side allowlist; never pass "
    "request input to filesystem include calls."
)


@dataclass(frozen=True)
class InjectionPoint:
    """One mutable query parameter; ``index`` disambiguates repeated names."""

    name: str
    index: int
    original_value: str


@dataclass(frozen=True)
class ErrorSignature:
    """A DBMS error fingerprint matched against response bodies."""

    dbms: str
    pattern: str
    regex: re.Pattern | None = None

    def compiled(self) -> re.Pattern:
        return self.regex if self.regex is not None else re.compile(self.pattern)


@dataclass(frozen=True)
class LfiPayload:
    """A traversal payload and the marker regex proving file disclosure."""

    payload: str
    marker: str
    regex: re.Pattern | None = None

    def compiled(self) -> re.Pattern:
        return self.regex if self.regex is not None else re.compile(self.marker)


@dataclass(frozen=True)
class ProbeEvidence:
    """Proof for one vulnerable point: the request sent and what came back."""

    point: InjectionPoint
    payload_url: str
    signature: str
    excerpt: str


@dataclass(frozen=True)
class VulnFinding:
    """Outcome of one probe run against one URL."""

    kind: str
    status: str
    evidence: tuple[ProbeEvidence, ...] = ()
    dbms_guess: str | None = None
    remediation: str = ""


def load_error_signatures(data: bytes) -> list[ErrorSignature]:
    """Parse a JSON array of ``{"dbms", "pattern"}`` error signatures."""
    records = _load_json_array(data, "error signature")
    signatures = []
    for record in records:
        dbms = record.get("dbms")
        pattern = record.get("pattern")
        if not isinstance(dbms, str) or not isinstance(pattern, str) or not pattern:
            raise DataFileError("error signature records need dbms and pattern strings")
        try:
            regex = re.compile(pattern)
        except re.error as exc:
            raise DataFileError(f"error signature regex {pattern!r}: {exc}") from None
        signatures.append(ErrorSignature(dbms=dbms, pattern=pattern, regex=regex))
    return signatures


def load_lfi_payloads(data: bytes) -> list[LfiPayload]:
    """Parse a JSON array of ``{"payload", "marker"}`` LFI payloads."""
    records = _load_json_array(data, "LFI payload")
    payloads = []
    for record in records:
        payload = record.get("payload")
        marker = record.get("marker")
        if not isinstance(payload, str) or not isinstance(marker, str) or not marker:
            raise DataFileError("LFI payload records need payload and marker strings")
        try:
            regex = re.compile(marker)
        except re.error as exc:
            raise DataFileError(f"LFI marker regex {marker!r}: {exc}") from None
        payloads.append(LfiPayload(payload=payload, marker=marker, regex=regex))
    return payloads


def _load_json_array(data: bytes, what: str) -> list[dict]:
    try:
        records = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataFileError(f"invalid {what} file: {exc}") from None
    if not isinstance(records, list) or not records:
        raise DataFileError(f"{what} file must be a non-empty JSON array")
    if not all(isinstance(r, dict) for r in records):
        raise DataFileError(f"{what} records must be objects")
    return records


def default_error_signatures() -> list[ErrorSignature]:
    """Bundled DBMS error strings (MySQL, SQL Server, Oracle, PostgreSQL)."""
    data = resources.files("recon_kit").joinpath("data/sql_error_signatures.json")
    return load_error_signatures(data.read_bytes())


def default_lfi_payloads() -> list[LfiPayload]:
    """Bundled traversal payloads, including null-byte and encoded variants."""
    data = resources.files("recon_kit").joinpath("data/lfi_payloads.json")
    return load_lfi_payloads(data.read_bytes())


def enumerate_injection_points(url: CanonicalUrl) -> list[InjectionPoint]:
    """One point per query pair, in query order; repeats get indexes 0, 1, ..."""
    counts: dict[str, int] = {}
    points = []
    for name, value in url.query:
        index = counts.get(name, 0)
        counts[name] = index + 1
        points.append(InjectionPoint(name=name, index=index, original_value=value))
    return points


def match_error_signatures(
    body: str, signatures: list[ErrorSignature]
) -> list[tuple[str, str]]:
    """Report every matching signature once as (dbms, excerpt).

    Ordered by the offset of each signature's first match, then dbms name.
    """
    return [
        (sig.dbms, excerpt) for sig, _, excerpt in _matching_signatures(body, signatures)
    ]


def _matching_signatures(
    body: str, signatures: list[ErrorSignature]
) -> list[tuple[ErrorSignature, int, str]]:
    hits = []
    for sig in signatures:
        m = sig.compiled().search(body)
        if m:
            hits.append((sig, m.start(), m.group(0)[:EVIDENCE_EXCERPT_LIMIT]))
    hits.sort(key=lambda h: (h[1], h[0].dbms, h[0].pattern))
    return hits


def _replace_value(url: CanonicalUrl, point: InjectionPoint, value: str) -> CanonicalUrl:
    """Rebuild the URL with exactly one parameter value swapped."""
    counts: dict[str, int] = {}
    query = []
    for name, original in url.query:
        index = counts.get(name, 0)
        counts[name] = index + 1
        if name == point.name and index == point.index:
            query.append((name, value))
        else:
            query.append((name, original))
    return url.with_query(tuple(query))


def _require_active(active: bool, kind: str) -> None:
    if not active:
        raise ActiveModeRequired(
            f"{kind} probing sends attack-shaped requests; pass active=True to enable"
        )


def _probe_fetch(fetcher, url: CanonicalUrl, point: InjectionPoint):
    try:
        return fetcher.fetch(url)
    except NetworkError as exc:
        raise NetworkError(
            f"while probing parameter {point.name}#{point.index}: {exc}",
            url=exc.url or url.render(),
        ) from exc


def probe_sqli(
    url: CanonicalUrl,
    fetcher,
    signatures: list[ErrorSignature],
    *,
    active: bool = False,
) -> VulnFinding:
    """Quote-append probe for classical (error-based) SQL injection.

    Fetches the baseline, then refetches once per injection point with a
    single quote appended to that value (percent-encoded on the wire). A
    point counts as vulnerable only when the mutated response matches an
    error signature the baseline did not match. Statuses: ``vulnerable``
    if any point hit; ``not_applicable`` with no query parameters;
    ``inconclusive`` when the baseline itself already matches a signature;
    ``not_vulnerable`` otherwise. Issues exactly ``1 + len(points)``
    requests.
    """
    _require_active(active, "SQL injection")
    points = enumerate_injection_points(url)
    baseline = fetcher.fetch(url)
    baseline_text = baseline.body.decode("utf-8", errors="replace")
    baseline_sigs = {
        (sig.dbms, sig.pattern)
        for sig, _, _ in _matching_signatures(baseline_text, signatures)
    }

    evidence: list[ProbeEvidence] = []
    dbms_guess: str | None = None
    for point in points:
        mutated = _replace_value(url, point, point.original_value + "'")
        response = _probe_fetch(fetcher, mutated, point)
        text = response.body.decode("utf-8", errors="replace")
        new_hits = [
            (sig, pos, excerpt)
            for sig, pos, excerpt in _matching_signatures(text, signatures)
            if (sig.dbms, sig.pattern) not in baseline_sigs
        ]
        if new_hits:
            sig, _, excerpt = new_hits[0]
            evidence.append(
                ProbeEvidence(
                    point=point,
                    payload_url=mutated.render(),
                    signature=sig.pattern,
                    excerpt=excerpt,
                )
            )
            if dbms_guess is None:
                dbms_guess = sig.dbms

    if evidence:
        status = STATUS_VULNERABLE
    elif not points:
        status = STATUS_NOT_APPLICABLE
    elif baseline_sigs:
        status = STATUS_INCONCLUSIVE
    else:
        status = STATUS_NOT_VULNERABLE
    return VulnFinding(
        kind=KIND_SQLI,
        status=status,
        evidence=tuple(evidence),
        dbms_guess=dbms_guess,
        remediation=SQLI_REMEDIATION,
    )


def probe_lfi(
    url: CanonicalUrl,
    fetcher,
    payloads: list[LfiPayload],
    *,
    active: bool = False,
) -> VulnFinding:
    """Traversal probe for local file inclusion.

    Each injection point is tried with each payload in order, replacing the
    original value outright; the probe stops at the first response whose
    body matches the payload's marker regex. ``not_applicable`` when the
    URL has no query parameters.
    """
    _require_active(active, "LFI")
    points = enumerate_injection_points(url)
    if not points:
        return VulnFinding(
            kind=KIND_LFI, status=STATUS_NOT_APPLICABLE, remediation=LFI_REMEDIATION
        )
    for point in points:
        for payload in payloads:
            mutated = _replace_value(url, point, payload.payload)
            response = _probe_fetch(fetcher, mutated, point)
            text = response.body.decode("utf-8", errors="replace")
            m = payload.compiled().search(text)
            if m:
                evidence = ProbeEvidence(
                    point=point,
                    payload_url=mutated.render(),
                    signature=payload.marker,
                    excerpt=m.group(0)[:EVIDENCE_EXCERPT_LIMIT],
                )
                return VulnFinding(
                    kind=KIND_LFI,
                    status=STATUS_VULNERABLE,
                    evidence=(evidence,),
                    remediation=LFI_REMEDIATION,
                )
    return VulnFinding(
        kind=KIND_LFI, status=STATUS_NOT_VULNERABLE, remediation=LFI_REMEDIATION
    )
