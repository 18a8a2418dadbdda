"""Server banner parsing, OS inference and CMS signature matching.

The CMS engine is data-driven: a JSON signature file declares weighted
patterns of four kinds (body regex, meta-generator regex, probe path,
header regex). Evidence for one CMS is combined with a noisy-OR, so the
reported confidence is ``1 - prod(1 - weight_i)`` over its matched
signatures: monotone in evidence and bounded in [0, 1].

The bundled starter signatures for WordPress, Joomla and Drupal are
reconstructions of commonly observed markers; extend or replace them via
your own signature file.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field

from .errors import SignatureError
from .http_probe import HttpSnapshot

CMS_REPORT_THRESHOLD = 0.5
EXCERPT_LIMIT = 120

SIGNATURE_KINDS = frozenset({"body_regex", "meta_generator", "url_path", "header_regex"})

OS_LINUX = "linux"
OS_WINDOWS = "windows"
OS_BSD = "bsd"
OS_UNKNOWN = "unknown"

# First matching token wins; scanned case-insensitively against the raw
# banner. Detail is only set where the token names a distribution.
_PLATFORM_RULES: tuple[tuple[str, str, str | None], ...] = (
    ("ubuntu", OS_LINUX, "Ubuntu"),
    ("debian", OS_LINUX, "Debian"),
    ("centos", OS_LINUX, "CentOS"),
    ("fedora", OS_LINUX, "Fedora"),
    ("red hat", OS_LINUX, "Red Hat"),
    ("microsoft-iis", OS_WINDOWS, None),
    ("win64", OS_WINDOWS, None),
    ("win32", OS_WINDOWS, None),
    ("windows", OS_WINDOWS, None),
    ("freebsd", OS_BSD, "FreeBSD"),
    ("openbsd", OS_BSD, "OpenBSD"),
    ("netbsd", OS_BSD, "NetBSD"),
    ("linux", OS_LINUX, None),
)

_COMMENT_RE = re.compile(r"\(([^)]*)\)")
_META_TAG_RE = re.compile(r"<meta\b[^>]*>", re.IGNORECASE)


@dataclass(frozen=True)
class ServerBanner:
    """Parsed Server header; ``raw`` is always the verbatim header value."""

    raw: str
    product: str | None = None
    version: str | None = None
    comments: tuple[str, ...] = ()


@dataclass(frozen=True)
class PlatformHint:
    """Operating-system guess derived from the server banner.

    ``basis`` names the banner token that triggered the inference and is a
    verbatim substring of the banner whenever ``os_family`` is known.
    """

    os_family: str
    os_detail: str | None = None
    basis: str = ""


@dataclass(frozen=True)
class Signature:
    """One CMS fingerprint rule.

    For regex kinds ``pattern`` is the expression to match; for the
    ``url_path`` kind it is the literal path that must answer 200 when
    probed. ``version_capture`` marks patterns carrying a named group
    ``v`` whose capture becomes the CMS version.
    """

    id: str
    cms: str
    kind: str
    pattern: str
    weight: float
    version_capture: bool = False
    regex: re.Pattern | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class SignatureSet:
    """Immutable, shareable collection of compiled signatures."""

    signatures: tuple[Signature, ...]
    source_digest: str

    def url_paths(self) -> list[str]:
        """Paths the orchestrator must probe to satisfy url_path rules."""
        return [s.pattern for s in self.signatures if s.kind == "url_path"]


@dataclass(frozen=True)
class CmsMatch:
    """One identified CMS with its combined confidence and evidence trail."""

    cms: str
    version: str | None
    confidence: float
    evidence: tuple[tuple[str, str], ...]  # (signature id, matched excerpt)


def load_signatures(data: bytes) -> SignatureSet:
    """Parse and compile a UTF-8 JSON signature file.

    Each record is ``{"id", "cms", "kind", "pattern", "weight",
    "version_capture"?}``. Every pattern is compiled up front so matching
    can never fail later.

    Raises:
        SignatureError: malformed JSON, bad regex, duplicate id, weight out
            of (0, 1], or unknown kind.
    """
    try:
        records = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SignatureError("<file>", f"invalid JSON: {exc}") from None
    if not isinstance(records, list) or not records:
        raise SignatureError("<file>", "expected a non-empty JSON array")

    signatures: list[Signature] = []
    seen: set[str] = set()
    for record in records:
        if not isinstance(record, dict):
            raise SignatureError("<file>", "record is not an object")
        sig_id = str(record.get("id", ""))
        if not sig_id:
            raise SignatureError("<file>", "record without id")
        if sig_id in seen:
            raise SignatureError(sig_id, "duplicate")
        seen.add(sig_id)

        cms = str(record.get("cms", ""))
        if not cms:
            raise SignatureError(sig_id, "missing cms name")
        kind = record.get("kind")
        if kind not in SIGNATURE_KINDS:
            raise SignatureError(sig_id, f"unknown kind {kind!r}")
        pattern = record.get("pattern")
        if not isinstance(pattern, str) or not pattern:
            raise SignatureError(sig_id, "missing pattern")
        weight = record.get("weight")
        if not isinstance(weight, (int, float)) or not 0 < float(weight) <= 1:
            raise SignatureError(sig_id, "weight out of range (0, 1]")

        regex: re.Pattern | None = None
        if kind != "url_path":
            try:
                regex = re.compile(pattern)
            except re.error as exc:
                raise SignatureError(sig_id, f"regex: {exc}") from None
        declared = record.get("version_capture")
        has_group = regex is not None and "v" in regex.groupindex
        if declared and not has_group:
            raise SignatureError(sig_id, "version_capture without a (?P<v>...) group")
        signatures.append(
            Signature(
                id=sig_id,
                cms=cms,
                kind=kind,
                pattern=pattern,
                weight=float(weight),
                version_capture=has_group,
                regex=regex,
            )
        )
    digest = hashlib.sha256(data).hexdigest()
    return SignatureSet(signatures=tuple(signatures), source_digest=digest)


def extract_server_banner(snapshot: HttpSnapshot) -> ServerBanner | None:
    """Parse the Server header as ``product[/version] [(comment) ...]``.

    Returns None when the header is missing. Parse failures leave product
    and version absent but never lose the raw value.
    """
    raw = snapshot.headers.get("Server")
    if raw is None:
        return None
    comments = tuple(_COMMENT_RE.findall(raw))
    product: str | None = None
    version: str | None = None
    head = raw.split(None, 1)[0] if raw.split() else ""
    if head and not head.startswith("("):
        product_part, _, version_part = head.partition("/")
        product = product_part or None
        version = version_part or None
    return ServerBanner(raw=raw, product=product, version=version, comments=comments)


def infer_platform(banner: ServerBanner) -> PlatformHint:
    """Guess the host OS family from banner tokens; first rule wins."""
    folded = banner.raw.lower()
    for token, family, detail in _PLATFORM_RULES:
        index = folded.find(token)
        if index != -1:
            basis = banner.raw[index : index + len(token)]
            return PlatformHint(os_family=family, os_detail=detail, basis=basis)
    return PlatformHint(os_family=OS_UNKNOWN)


def _meta_generator_values(body_text: str) -> list[str]:
    """Content values of every ``<meta name="generator" ...>`` tag."""
    values = []
    for tag_match in _META_TAG_RE.finditer(body_text):
        tag = tag_match.group(0)
        name = _attr(tag, "name")
        if name is None or name.lower() != "generator":
            continue
        content = _attr(tag, "content")
        if content is not None:
            values.append(content)
    return values


def _attr(tag: str, name: str) -> str | None:
    m = re.search(
        rf"""\b{name}\s*=\s*(?:"([^"]*)"|'([^']*)'|([^\s"'>]+))""",
        tag,
        re.IGNORECASE,
    )
    if m is None:
        return None
    return next(g for g in m.groups() if g is not None)


def _match_signature(
    sig: Signature,
    body_text: str,
    snapshot: HttpSnapshot,
    extra_snapshots: dict[str, HttpSnapshot],
) -> tuple[str, str | None] | None:
    """Try one signature; return (excerpt, captured version) on a match."""
    if sig.kind == "url_path":
        extra = extra_snapshots.get(sig.pattern)
        if extra is not None and extra.status == 200:
            return sig.pattern, None
        return None

    assert sig.regex is not None
    if sig.kind == "body_regex":
        m = sig.regex.search(body_text)
    elif sig.kind == "meta_generator":
        m = None
        for value in _meta_generator_values(body_text):
            m = sig.regex.search(value)
            if m:
                break
    else:  # header_regex, applied to each "Name: value" line
        m = None
        for header_name, header_value in snapshot.headers:
            m = sig.regex.search(f"{header_name}: {header_value}")
            if m:
                break
    if m is None:
        return None
    excerpt = m.group(0)[:EXCERPT_LIMIT]
    version = m.groupdict().get("v") if sig.version_capture else None
    return excerpt, version


def identify_cms(
    snapshot: HttpSnapshot,
    extra_snapshots: dict[str, HttpSnapshot],
    signature_set: SignatureSet,
    threshold: float = CMS_REPORT_THRESHOLD,
) -> list[CmsMatch]:
    """Run every signature against the snapshot and score per CMS.

    ``extra_snapshots`` carries the responses for any ``url_path`` probes,
    keyed by path; the orchestrator fetches those so this function stays
    pure. Matches below *threshold* are suppressed. The result is sorted by
    confidence descending, ties broken by CMS name, and is independent of
    signature file order.
    """
    body_text = snapshot.body.decode("utf-8", errors="replace")

    # cms -> list of (signature, excerpt, captured version)
    matched: dict[str, list[tuple[Signature, str, str | None]]] = {}
    for sig in signature_set.signatures:
        hit = _match_signature(sig, body_text, snapshot, extra_snapshots)
        if hit is not None:
            excerpt, version = hit
            matched.setdefault(sig.cms, []).append((sig, excerpt, version))

    results: list[CmsMatch] = []
    for cms, hits in matched.items():
        remaining = 1.0
        for sig, _, _ in hits:
            remaining *= 1.0 - sig.weight
        confidence = 1.0 - remaining
        if confidence < threshold:
            continue
        evidence = tuple(sorted((sig.id, excerpt) for sig, excerpt, _ in hits))
        versioned = [(sig.weight, sig.id, v) for sig, _, v in hits if v is not None]
        version = None
        if versioned:
            versioned.sort(key=lambda item: (-item[0], item[1]))
            version = versioned[0][2]
        results.append(
            CmsMatch(cms=cms, version=version, confidence=confidence, evidence=evidence)
        )
    results.sort(key=lambda m: (-m.confidence, m.cms))
    return results
