"""WHOIS wire protocol client and line-oriented response parser.

The wire contract is the classic port-43 exchange: open TCP, send the
domain followed by CRLF, read text until the server closes. A single
referral ("refer:" or "Whois Server:" line) is followed, at most once.
Parsing is best-effort and never raises; whatever cannot be understood is
still preserved verbatim in ``raw``.
"""

from __future__ import annotations

import os
import re
import socket
from dataclasses import dataclass
from datetime import date, datetime, timezone

from .errors import NetworkError, ReferralLoop

WHOIS_PORT = 43
WHOIS_SERVER_ENV = "W3SCRAPE_WHOIS_SERVER"

_REFERRAL_RE = re.compile(
    r"^\s*(?:refer|whois server)\s*:\s*(\S+)\s*$", re.IGNORECASE | re.MULTILINE
)

_REGISTRAR_KEYS = {"registrar"}
_CREATION_KEYS = {"creation date", "created on", "created"}
_EXPIRY_KEYS = {"registry expiry date", "expiration date", "expiry date"}

# IANA-style defaults per TLD; every test overrides these with fixtures.
DEFAULT_SERVERS = {
    "com": "whois.verisign-grs.com",
    "net": "whois.verisign-grs.com",
    "org": "whois.pir.org",
    "info": "whois.afilias.net",
    "io": "whois.nic.io",
}
FALLBACK_SERVER = "whois.iana.org"


@dataclass(frozen=True)
class WhoisRecord:
    """Registration data for one domain; ``raw`` is the full response text."""

    domain: str
    registrar: str | None = None
    creation_date: date | None = None
    expiry_date: date | None = None
    server_chain: tuple[str, ...] = ()
    raw: str = ""


def server_for(domain: str, override: str | None = None) -> str:
    """Pick the server to ask: explicit override, then env, then TLD map."""
    if override:
        return override
    env = os.environ.get(WHOIS_SERVER_ENV)
    if env:
        return env
    tld = domain.rsplit(".", 1)[-1].lower()
    return DEFAULT_SERVERS.get(tld, FALLBACK_SERVER)


def _split_server(server: str | tuple[str, int]) -> tuple[str, int]:
    if isinstance(server, tuple):
        return server[0], int(server[1])
    host, _, port = server.partition(":")
    return host, int(port) if port else WHOIS_PORT


def _exchange(host: str, port: int, domain: str, timeout: float) -> str:
    address = f"{host}:{port}"
    try:
        with socket.create_connection((host, port), timeout=timeout) as sock:
            sock.sendall(domain.encode("utf-8") + b"\r\n")
            chunks = []
            while True:
                chunk = sock.recv(4096)
                if not chunk:
                    break
                chunks.append(chunk)
    except OSError as exc:
        raise NetworkError(f"whois query to {address} failed: {exc}", url=address) from exc
    return b"".join(chunks).decode("utf-8", errors="replace")


def query_whois(
    domain: str,
    server: str | tuple[str, int],
    timeout_millis: int = 10_000,
) -> tuple[str, tuple[str, ...]]:
    """Query *server* for *domain*, following at most one referral.

    Returns the final response text and the chain of servers queried.

    Raises:
        NetworkError: connect/read failure, tagged with the server address.
        ReferralLoop: the response refers back to the server just asked.
    """
    host, port = _split_server(server)
    timeout = timeout_millis / 1000.0
    text = _exchange(host, port, domain, timeout)
    chain = [f"{host}:{port}"]

    referral = _REFERRAL_RE.search(text)
    if referral:
        ref_host, ref_port = _split_server(referral.group(1))
        if (ref_host.lower(), ref_port) == (host.lower(), port):
            raise ReferralLoop(f"{host}:{port}")
        text = _exchange(ref_host, ref_port, domain, timeout)
        chain.append(f"{ref_host}:{ref_port}")
    return text, tuple(chain)


def _parse_date(text: str) -> date | None:
    """Accept ISO-8601 (with or without time/zone) and DD-Mon-YYYY."""
    text = text.strip()
    if not text:
        return None
    iso = text[:-1] + "+00:00" if text.endswith("Z") else text
    try:
        parsed = datetime.fromisoformat(iso)
        if parsed.tzinfo is not None:
            parsed = parsed.astimezone(timezone.utc)
        return parsed.date()
    except ValueError:
        pass
    try:
        return date.fromisoformat(text[:10])
    except ValueError:
        pass
    try:
        return datetime.strptime(text, "%d-%b-%Y").date()
    except ValueError:
        return None


def parse_whois(
    raw: str,
    domain: str = "",
    server_chain: tuple[str, ...] = (),
) -> WhoisRecord:
    """Scan ``key: value`` lines for registrar and creation/expiry dates.

    Key aliases are matched case-insensitively; the first line that yields
    a usable value wins. Never raises: unparseable fields are simply left
    absent and the raw text is preserved unchanged.
    """
    registrar: str | None = None
    creation: date | None = None
    expiry: date | None = None
    for line in raw.splitlines():
        key, sep, value = line.partition(":")
        if not sep:
            continue
        key = key.strip().lower()
        value = value.strip()
        if registrar is None and key in _REGISTRAR_KEYS and value:
            registrar = value
        elif creation is None and key in _CREATION_KEYS:
            creation = _parse_date(value)
        elif expiry is None and key in _EXPIRY_KEYS:
            expiry = _parse_date(value)
    return WhoisRecord(
        domain=domain,
        registrar=registrar,
        creation_date=creation,
        expiry_date=expiry,
        server_chain=tuple(server_chain),
        raw=raw,
    )


def lookup(
    domain: str,
    server: str | tuple[str, int],
    timeout_millis: int = 10_000,
) -> WhoisRecord:
    """Query then parse; the convenience path used by the report pipeline."""
    raw, chain = query_whois(domain, server, timeout_millis=timeout_millis)
    return parse_whois(raw, domain=domain, server_chain=chain)
